use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, ValueEnum};
use hcsplit_core::graph::{generate_planted, planted_tree, Graph, Profile, Shape};
use hcsplit_core::io::{read_graph, read_tree};
use hcsplit_core::oracle::{Adversary, OracleConfig, SplittingOracle};
use hcsplit_core::sparsest::CutConfig;
use hcsplit_core::{HCTree, SplitParams};

/// Bad flags or flag combinations; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// `7`, `1..50` (inclusive) or `1,4,9`.
#[derive(Clone, Debug)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Seeds, String> {
        let bad = |_| format!("bad seed list {s:?}");
        if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi): (u64, u64) = (lo.parse().map_err(bad)?, hi.parse().map_err(bad)?);
            if lo > hi {
                return Err(format!("empty seed range {s:?}"));
            }
            return Ok(Seeds((lo..=hi).collect()));
        }
        s.split(',')
            .map(|x| x.trim().parse().map_err(bad))
            .collect::<Result<_, _>>()
            .map(Seeds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    /// Strong partial tree only.
    Strong,
    /// Weak partial tree only.
    Weak,
    HcDas,
    HcDasFast,
    HcMw,
    /// Oracle-free recursive sparsest cuts on the whole graph.
    RecursiveSparsest,
    /// The planted tree itself.
    Planted,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Strong => "strong",
            Algo::Weak => "weak",
            Algo::HcDas => "hc-das",
            Algo::HcDasFast => "hc-das-fast",
            Algo::HcMw => "hc-mw",
            Algo::RecursiveSparsest => "recursive-sparsest",
            Algo::Planted => "planted",
        }
    }

    pub fn uses_oracle(self) -> bool {
        !matches!(self, Algo::RecursiveSparsest | Algo::Planted)
    }
}

#[derive(Args, Clone, Debug)]
pub struct InstanceArgs {
    /// Vertex count of a generated planted instance.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "random")]
    pub shape: String,
    /// Weight base of the planted profile.
    #[arg(long, default_value_t = 2.0)]
    pub base: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Graph file (JSON or edge list) instead of a generated instance.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Reference tree file driving the oracle.
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct OracleArgs {
    /// Probability that an oracle answer is correct.
    #[arg(long, default_value_t = 0.9)]
    pub p: f64,
    /// random_wrong, fixed_min_wrong or alt_tree.
    #[arg(long, default_value = "random_wrong")]
    pub adversary: String,
}

#[derive(Args, Clone, Debug)]
pub struct ParamArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// Super-vertex threshold override.
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Count over full universes instead of samples.
    #[arg(long)]
    pub exact_counters: bool,
    /// Largest vertex count cut by exhaustive enumeration.
    #[arg(long, default_value_t = 20)]
    pub exact_limit: usize,
}

/// Graph and reference tree for one seed.
pub struct Instance {
    pub graph: Option<Arc<Graph>>,
    pub tree: Arc<HCTree>,
}

impl InstanceArgs {
    pub fn profile(&self) -> anyhow::Result<Profile> {
        let shape: Shape = self.shape.parse().map_err(|e| config_error(format!("{e}")))?;
        Ok(Profile {
            shape,
            base: self.base,
            jitter: self.jitter,
        })
    }

    /// Loads the files once when given; otherwise every seed generates its
    /// own planted instance.
    pub fn loader(&self) -> anyhow::Result<Box<dyn Fn(u64) -> anyhow::Result<Instance> + Sync>> {
        match (&self.graph, &self.tree) {
            (graph, Some(tree)) => {
                let tree = Arc::new(read_tree(tree).with_context(|| format!("reading {}", tree.display()))?);
                let graph = match graph {
                    Some(path) => Some(Arc::new(
                        read_graph(path).with_context(|| format!("reading {}", path.display()))?,
                    )),
                    None => None,
                };
                if let Some(g) = &graph {
                    if tree.vertices() != (0..g.n()).collect::<Vec<_>>() {
                        return Err(config_error("tree leaves differ from the graph's vertex set"));
                    }
                }
                Ok(Box::new(move |_| {
                    Ok(Instance {
                        graph: graph.clone(),
                        tree: tree.clone(),
                    })
                }))
            }
            (Some(_), None) => Err(config_error("--graph needs a reference --tree")),
            (None, None) => {
                let n = self.n.ok_or_else(|| config_error("give --n or --tree"))?;
                if n < 2 {
                    return Err(config_error("--n must be at least 2"));
                }
                let profile = self.profile()?;
                Ok(Box::new(move |seed| {
                    let inst = generate_planted(n, seed, &profile)?;
                    Ok(Instance {
                        graph: Some(Arc::new(inst.graph)),
                        tree: Arc::new(inst.tree),
                    })
                }))
            }
        }
    }
}

impl OracleArgs {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.p > 0.5 && self.p <= 1.0) {
            return Err(config_error(format!("--p {} outside (0.5, 1]", self.p)));
        }
        match self.adversary.replace('-', "_").as_str() {
            "alt_tree" => Ok(()),
            other => other
                .parse::<Adversary>()
                .map(|_| ())
                .map_err(|e| config_error(e.to_string())),
        }
    }

    /// `alt_tree` answers from a second random tree drawn from the seed.
    pub fn oracle(&self, truth: Arc<HCTree>, seed: u64, p: f64) -> anyhow::Result<SplittingOracle> {
        let adversary = if self.adversary.replace('-', "_") == "alt_tree" {
            let alt = planted_tree(truth.n(), seed ^ 0xa17, Shape::Random)?;
            let labels = truth.vertices();
            Adversary::AltTree(Arc::new(alt.relabel(&labels)?))
        } else {
            self.adversary.parse().map_err(|e: hcsplit_core::Error| config_error(e.to_string()))?
        };
        Ok(SplittingOracle::from_arc(truth, OracleConfig::new(p, adversary, seed))?)
    }
}

impl ParamArgs {
    pub fn params(&self, n: usize, seed: u64) -> anyhow::Result<SplitParams> {
        let mut params = match self.preset {
            Preset::Desk => SplitParams::desk(n),
            Preset::Paper => SplitParams::paper(n),
        };
        if let Some(tau) = self.tau {
            params.tau = tau;
        }
        if let Some(eps) = self.eps {
            params.eps = eps;
        }
        params.exact_counters |= self.exact_counters;
        params.seed = seed;
        params.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(params)
    }

    pub fn cuts(&self, seed: u64) -> CutConfig {
        CutConfig {
            exact_limit: self.exact_limit,
            seed,
            ..CutConfig::default()
        }
    }

    /// Exact cuts inside super-vertices need `tau <= exact_limit`.
    pub fn check_exact_cuts(&self, n: usize) -> anyhow::Result<()> {
        let tau = self.params(n, 0)?.tau;
        if tau > self.exact_limit {
            return Err(config_error(format!(
                "tau = {tau} exceeds --exact-limit {}; pass a smaller --tau or use hc-das-fast",
                self.exact_limit
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!("7".parse::<Seeds>().unwrap().0, vec![7]);
        assert_eq!("1..4".parse::<Seeds>().unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!("3,1".parse::<Seeds>().unwrap().0, vec![3, 1]);
        assert!("4..1".parse::<Seeds>().is_err());
        assert!("x".parse::<Seeds>().is_err());
    }
}
