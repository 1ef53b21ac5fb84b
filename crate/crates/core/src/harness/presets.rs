//! Built-in experiment configs.

use super::config::{load_config, ConfigError, ExperimentConfig};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// The config as TOML, exactly as shipped.
    pub source: &'static str,
}

macro_rules! preset {
    ($name:literal, $desc:literal) => {
        Preset {
            name: $name,
            description: $desc,
            source: include_str!(concat!("../../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig1", "chartist fraction against its stationary density, constant rates"),
    preset!("fig2", "returns at N = 50, 500, 5000 with price-dependent rates"),
    preset!("fig5", "self-organized market size from two starting points"),
    preset!("lm-baseline", "Lux-Marchesi at N = 500"),
    preset!("lm-largeN", "Lux-Marchesi at N = 10000, same per-capita parameters"),
    preset!("gcmg-producers-only", "grand-canonical minority game without speculators"),
    preset!("gcmg-speculators", "grand-canonical minority game near the critical point"),
    preset!("thurner-leverage-scan", "leveraged funds, leverage cap 1, 2, 5, 10"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig, ConfigError> {
        load_config(self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_loads() {
        for p in PRESETS {
            let c = p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(!c.runs().unwrap().is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn names_are_unique() {
        for (i, p) in PRESETS.iter().enumerate() {
            assert!(PRESETS[..i].iter().all(|q| q.name != p.name));
        }
        assert!(find("fig2").is_some());
        assert!(find("fig3").is_none());
    }
}
