//! Runtime selection of wider vector units for hot loops.

/// Wraps an `#[inline(always)]` kernel in a function that runs it compiled
/// for the widest vector unit available at run time. The kernels use only
/// separate IEEE multiplies and adds, never fused ones, so every variant
/// produces identical bits.
macro_rules! multiversion {
    ($vis:vis fn $name:ident => $kernel:ident($($p:ident: $t:ty),* $(,)?)) => {
        $vis fn $name($($p: $t),*) {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx512f")]
                unsafe fn avx512($($p: $t),*) {
                    $kernel($($p),*)
                }
                #[target_feature(enable = "avx2")]
                unsafe fn avx2($($p: $t),*) {
                    $kernel($($p),*)
                }
                if std::arch::is_x86_feature_detected!("avx512f") {
                    // SAFETY: the feature was detected on this CPU.
                    return unsafe { avx512($($p),*) };
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the feature was detected on this CPU.
                    return unsafe { avx2($($p),*) };
                }
            }
            $kernel($($p),*)
        }
    };
}

pub(crate) use multiversion;
