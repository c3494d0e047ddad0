use super::{Mode, ModelConfig};

/// Spatial grid a layer runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    /// The low-resolution input grid.
    Input,
    /// Output of the ESA stride-2 convolution.
    EsaStrided,
    /// Output of the ESA max-pool.
    EsaPooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerRole {
    Head,
    RrrbExpand { block: usize, rrrb: usize },
    RrrbK3 { block: usize, rrrb: usize },
    RrrbReduce { block: usize, rrrb: usize },
    RrrbMerged { block: usize, rrrb: usize },
    BlockConv { block: usize },
    EsaReduce { block: usize },
    EsaStride { block: usize },
    EsaPoolConv { block: usize },
    EsaSkip { block: usize },
    EsaExpand { block: usize },
    Trunk,
    Tail,
}

/// Shape and placement of one named convolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub role: LayerRole,
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub resolution: Resolution,
}

impl LayerSpec {
    fn new(name: String, role: LayerRole, c_in: usize, c_out: usize, k: usize) -> Self {
        Self {
            name,
            role,
            c_out,
            c_in,
            k,
            stride: 1,
            padding: (k - 1) / 2,
            resolution: Resolution::Input,
        }
    }

    pub fn param_count(&self) -> usize {
        self.c_out * self.c_in * self.k * self.k + self.c_out
    }
}

pub fn rrrb_name(block: usize, rrrb: usize, part: &str) -> String {
    format!("block{block}.rrrb{rrrb}.{part}")
}

pub fn esa_name(block: usize, part: &str) -> String {
    format!("block{block}.esa.{part}")
}

/// Every convolution of the generator in canonical (container) order:
/// head, blocks by index with a fixed intra-block order, trunk, tail.
pub fn canonical_layers(cfg: &ModelConfig) -> Vec<LayerSpec> {
    let c = cfg.channels;
    let e = cfg.expanded();
    let s = cfg.esa_channels;
    let mut out = vec![LayerSpec::new("head".into(), LayerRole::Head, 3, c, 3)];
    for block in 0..cfg.num_blocks {
        for rrrb in 0..cfg.rrrb_per_block {
            match cfg.mode {
                Mode::Full => {
                    out.push(LayerSpec::new(
                        rrrb_name(block, rrrb, "expand"),
                        LayerRole::RrrbExpand { block, rrrb },
                        c,
                        e,
                        1,
                    ));
                    out.push(LayerSpec::new(
                        rrrb_name(block, rrrb, "k3"),
                        LayerRole::RrrbK3 { block, rrrb },
                        e,
                        e,
                        3,
                    ));
                    out.push(LayerSpec::new(
                        rrrb_name(block, rrrb, "reduce"),
                        LayerRole::RrrbReduce { block, rrrb },
                        e,
                        c,
                        1,
                    ));
                }
                Mode::Reparam => out.push(LayerSpec::new(
                    rrrb_name(block, rrrb, "merged"),
                    LayerRole::RrrbMerged { block, rrrb },
                    c,
                    c,
                    3,
                )),
            }
        }
        out.push(LayerSpec::new(
            format!("block{block}.conv1"),
            LayerRole::BlockConv { block },
            c,
            c,
            1,
        ));
        out.push(LayerSpec::new(
            esa_name(block, "reduce"),
            LayerRole::EsaReduce { block },
            c,
            s,
            1,
        ));
        out.push(LayerSpec {
            stride: 2,
            padding: 0,
            resolution: Resolution::EsaStrided,
            ..LayerSpec::new(
                esa_name(block, "stride"),
                LayerRole::EsaStride { block },
                s,
                s,
                3,
            )
        });
        out.push(LayerSpec {
            resolution: Resolution::EsaPooled,
            ..LayerSpec::new(
                esa_name(block, "pool_conv"),
                LayerRole::EsaPoolConv { block },
                s,
                s,
                3,
            )
        });
        out.push(LayerSpec::new(
            esa_name(block, "skip"),
            LayerRole::EsaSkip { block },
            s,
            s,
            1,
        ));
        out.push(LayerSpec::new(
            esa_name(block, "expand"),
            LayerRole::EsaExpand { block },
            s,
            c,
            1,
        ));
    }
    out.push(LayerSpec::new("trunk".into(), LayerRole::Trunk, c, c, 3));
    out.push(LayerSpec::new(
        "tail".into(),
        LayerRole::Tail,
        c,
        3 * cfg.scale * cfg.scale,
        3,
    ));
    out
}
