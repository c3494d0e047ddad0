use super::layout::{canonical_layers, Resolution};
use super::ModelConfig;

/// Exact number of kernel and bias scalars for `cfg` (mode included).
pub fn count_params(cfg: &ModelConfig) -> usize {
    canonical_layers(cfg).iter().map(|l| l.param_count()).sum()
}

/// Multiply-accumulates of every convolution for an `h x w` input:
/// `c_out * c_in * kh * kw * out_h * out_w` summed over layers. Activations,
/// pooling, interpolation, elementwise ops and pixel shuffle are excluded.
/// ESA layers below their minimum input size contribute nothing.
pub fn count_macs(cfg: &ModelConfig, h: usize, w: usize) -> u64 {
    let strided = |n: usize| if n >= 3 { (n - 3) / 2 + 1 } else { 0 };
    let pooled = |n: usize| if n >= 7 { (n - 7) / 3 + 1 } else { 0 };
    canonical_layers(cfg)
        .iter()
        .map(|l| {
            let (oh, ow) = match l.resolution {
                Resolution::Input => (h, w),
                Resolution::EsaStrided => (strided(h), strided(w)),
                Resolution::EsaPooled => (pooled(strided(h)), pooled(strided(w))),
            };
            (l.c_out * l.c_in * l.k * l.k) as u64 * (oh * ow) as u64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

    #[test]
    fn default_param_counts() {
        let cfg = ModelConfig::default();
        assert_eq!(count_params(&cfg), 744_270);
        assert_eq!(count_params(&cfg.with_mode(Mode::Reparam)), 205_278);
    }

    #[test]
    fn doubling_width_doubles_macs_on_fully_convolutional_layers() {
        let cfg = ModelConfig::default().with_mode(Mode::Reparam);
        // Without ESA interior rounding the count is linear in w; pick widths
        // where the stride/pool chain divides evenly.
        let a = count_macs(&cfg, 64, 64);
        assert!(a > 0);
        let no_esa = |c: &ModelConfig, h, w| {
            canonical_layers(c)
                .iter()
                .filter(|l| l.resolution == Resolution::Input)
                .map(|l| (l.c_out * l.c_in * l.k * l.k * h * w) as u64)
                .sum::<u64>()
        };
        assert_eq!(no_esa(&cfg, 720, 1920), 2 * no_esa(&cfg, 720, 960));
    }

    #[test]
    fn trunk_layer_at_960x720() {
        // Adding one block's worth of nothing but the trunk: compare two
        // configs that differ only in the tail width to isolate a layer.
        let a = ModelConfig {
            scale: 1,
            ..ModelConfig::default()
        };
        let b = ModelConfig {
            scale: 2,
            ..ModelConfig::default()
        };
        let tail_delta = count_macs(&b, 720, 960) - count_macs(&a, 720, 960);
        assert_eq!(tail_delta, 38 * 9 * 9 * 960 * 720);
        let trunk = 38u64 * 38 * 9 * 960 * 720;
        assert_eq!(trunk, 8_982_835_200);
    }
}
