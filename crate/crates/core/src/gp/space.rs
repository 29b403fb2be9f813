use crate::error::{Error, Result};
use crate::mlp::{
    Activation, ArchitectureSpec, Loss, BATCH_SIZES, HIDDEN_LAYERS_RANGE, LEARNING_RATE_RANGE, NEURONS_RANGE,
};

pub const SPACE_DIMS: usize = 6;

/// Maps architectures to points of the unit cube and back.
///
/// Coordinates: hidden layers, neurons (min-max scaled integers);
/// activation, batch size, loss (ordinal index / (levels − 1));
/// learning rate (min-max scaled in log10 space). Decoding rounds each
/// discrete coordinate to the nearest level.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpaceEncoding;

const CUBE_TOL: f64 = 1e-9;

fn scale_int(v: usize, (lo, hi): (usize, usize)) -> f64 {
    (v - lo) as f64 / (hi - lo) as f64
}

fn unscale_int(p: f64, (lo, hi): (usize, usize)) -> usize {
    lo + (p * (hi - lo) as f64).round() as usize
}

fn level(p: f64, levels: usize) -> usize {
    ((p * (levels - 1) as f64).round() as usize).min(levels - 1)
}

fn log_bounds() -> (f64, f64) {
    (LEARNING_RATE_RANGE.0.log10(), LEARNING_RATE_RANGE.1.log10())
}

impl SpaceEncoding {
    pub fn encode(spec: &ArchitectureSpec) -> [f64; SPACE_DIMS] {
        let (llo, lhi) = log_bounds();
        let batch_idx = BATCH_SIZES.iter().position(|b| *b == spec.batch_size).unwrap_or(0);
        let loss_idx = Loss::ALL.iter().position(|l| *l == spec.loss).expect("listed");
        let lr = ((spec.learning_rate.log10() - llo) / (lhi - llo)).clamp(0.0, 1.0);
        [
            scale_int(spec.hidden_layers, HIDDEN_LAYERS_RANGE),
            scale_int(spec.neurons_per_layer, NEURONS_RANGE),
            spec.activation.index() as f64 / (Activation::ALL.len() - 1) as f64,
            batch_idx as f64 / (BATCH_SIZES.len() - 1) as f64,
            lr,
            loss_idx as f64 / (Loss::ALL.len() - 1) as f64,
        ]
    }

    pub fn decode(point: &[f64]) -> Result<ArchitectureSpec> {
        if point.len() != SPACE_DIMS {
            return Err(Error::Dimension(format!(
                "encoded point has {} coordinates, expected {SPACE_DIMS}",
                point.len()
            )));
        }
        if point.iter().any(|p| !(*p >= -CUBE_TOL && *p <= 1.0 + CUBE_TOL)) {
            return Err(Error::InvalidArgument(format!("point {point:?} outside the unit cube")));
        }
        let p: Vec<f64> = point.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let (llo, lhi) = log_bounds();
        let spec = ArchitectureSpec {
            hidden_layers: unscale_int(p[0], HIDDEN_LAYERS_RANGE),
            neurons_per_layer: unscale_int(p[1], NEURONS_RANGE),
            activation: Activation::ALL[level(p[2], Activation::ALL.len())],
            batch_size: BATCH_SIZES[level(p[3], BATCH_SIZES.len())],
            learning_rate: 10f64.powf(llo + p[4] * (lhi - llo)),
            loss: Loss::ALL[level(p[5], Loss::ALL.len())],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Encodes the decoded point, i.e. snaps it onto the discrete grid.
    pub fn snap(point: &[f64]) -> Result<[f64; SPACE_DIMS]> {
        Ok(Self::encode(&Self::decode(point)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn mjp() -> ArchitectureSpec {
        ArchitectureSpec {
            hidden_layers: 1,
            neurons_per_layer: 10,
            activation: Activation::LeakyRelu,
            batch_size: 16,
            learning_rate: 0.0449,
            loss: Loss::L1,
        }
    }

    fn same(a: &ArchitectureSpec, b: &ArchitectureSpec) -> bool {
        a.hidden_layers == b.hidden_layers
            && a.neurons_per_layer == b.neurons_per_layer
            && a.activation == b.activation
            && a.batch_size == b.batch_size
            && a.loss == b.loss
            && (a.learning_rate.log10() - b.learning_rate.log10()).abs() <= 1e-9
    }

    #[test]
    fn endpoints() {
        let mut s = mjp();
        assert_eq!(SpaceEncoding::encode(&s)[0], 0.0);
        s.hidden_layers = 10;
        assert_eq!(SpaceEncoding::encode(&s)[0], 1.0);
        s.learning_rate = 0.05;
        assert_eq!(SpaceEncoding::encode(&s)[4], 1.0);
        s.learning_rate = 1e-4;
        assert_eq!(SpaceEncoding::encode(&s)[4], 0.0);
    }

    #[test]
    fn published_architecture_round_trips() {
        let s = mjp();
        let back = SpaceEncoding::decode(&SpaceEncoding::encode(&s)).unwrap();
        assert!(same(&s, &back), "{back:?}");
    }

    #[test]
    fn random_specs_round_trip() {
        let mut rng = Rng::new(17);
        for _ in 0..1000 {
            let s = ArchitectureSpec {
                hidden_layers: 1 + rng.below(10),
                neurons_per_layer: 10 + rng.below(91),
                activation: Activation::ALL[rng.below(6)],
                batch_size: BATCH_SIZES[rng.below(5)],
                learning_rate: 10f64.powf(rng.uniform_range(-4.0, 0.05f64.log10())),
                loss: Loss::ALL[rng.below(2)],
            };
            let p = SpaceEncoding::encode(&s);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = SpaceEncoding::decode(&p).unwrap();
            assert!(same(&s, &back), "{s:?} -> {back:?}");
        }
    }

    #[test]
    fn decode_rounds_to_nearest_level() {
        let s = SpaceEncoding::decode(&[0.52, 0.0, 0.29, 0.9, 0.5, 0.49]).unwrap();
        assert_eq!(s.hidden_layers, 6); // 1 + round(4.68)
        assert_eq!(s.activation, Activation::Tanh); // round(1.45)
        assert_eq!(s.batch_size, 64);
        assert_eq!(s.loss, Loss::L1);
    }

    #[test]
    fn rejects_out_of_cube() {
        assert!(SpaceEncoding::decode(&[1.2, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(SpaceEncoding::decode(&[0.0; 5]).is_err());
    }
}
