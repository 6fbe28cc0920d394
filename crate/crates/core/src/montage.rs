//! Electrode montage and region-of-interest grouping.
//!
//! The default montage is a 28-channel 10-20 layout including both
//! mastoids. The central region membership (Cz, FCz, C3, C4, FC3, FC4)
//! is fixed; the remaining region assignments are a shipped convention
//! and can be overridden with a custom [`RoiMap`].

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Named scalp regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Roi {
    Prefrontal,
    Frontal,
    Central,
    Parietal,
    LTemporal,
    RTemporal,
    Occipital,
}

impl Roi {
    pub const ALL: [Roi; 7] = [
        Roi::Prefrontal,
        Roi::Frontal,
        Roi::Central,
        Roi::Parietal,
        Roi::LTemporal,
        Roi::RTemporal,
        Roi::Occipital,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Roi::Prefrontal => "prefrontal",
            Roi::Frontal => "frontal",
            Roi::Central => "central",
            Roi::Parietal => "parietal",
            Roi::LTemporal => "l-temporal",
            Roi::RTemporal => "r-temporal",
            Roi::Occipital => "occipital",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prefrontal" => Ok(Roi::Prefrontal),
            "frontal" => Ok(Roi::Frontal),
            "central" => Ok(Roi::Central),
            "parietal" => Ok(Roi::Parietal),
            "l-temporal" | "l_temporal" => Ok(Roi::LTemporal),
            "r-temporal" | "r_temporal" => Ok(Roi::RTemporal),
            "occipital" => Ok(Roi::Occipital),
            other => Err(Error::Config(format!("unknown region '{other}'"))),
        }
    }
}

/// The 28-channel default montage, mastoids last.
pub fn default_channel_names() -> Vec<String> {
    [
        "Fp1", "Fp2", // prefrontal
        "F3", "F4", "Fz", "F7", "F8", // frontal
        "Cz", "FCz", "C3", "C4", "FC3", "FC4", // central
        "P3", "P4", "Pz", "CP3", "CP4", "CPz", // parietal
        "T3", "T5", // left temporal
        "T4", "T6", // right temporal
        "O1", "O2", "Oz", // occipital
        "A1", "A2", // mastoids
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Region → electrode-name assignment.
#[derive(Debug, Clone)]
pub struct RoiMap {
    regions: BTreeMap<Roi, Vec<String>>,
}

impl Default for RoiMap {
    fn default() -> Self {
        let mut regions = BTreeMap::new();
        let mut put = |roi: Roi, names: &[&str]| {
            regions.insert(roi, names.iter().map(|s| s.to_string()).collect());
        };
        put(Roi::Prefrontal, &["Fp1", "Fp2"]);
        put(Roi::Frontal, &["F3", "F4", "Fz", "F7", "F8"]);
        put(Roi::Central, &["Cz", "FCz", "C3", "C4", "FC3", "FC4"]);
        put(Roi::Parietal, &["P3", "P4", "Pz", "CP3", "CP4", "CPz"]);
        put(Roi::LTemporal, &["T3", "T5"]);
        put(Roi::RTemporal, &["T4", "T6"]);
        put(Roi::Occipital, &["O1", "O2", "Oz"]);
        RoiMap { regions }
    }
}

impl RoiMap {
    /// Builds a map from explicit assignments, enforcing the fixed central
    /// membership and non-empty regions.
    pub fn from_assignments(assignments: BTreeMap<Roi, Vec<String>>) -> Result<Self> {
        for roi in Roi::ALL {
            let members = assignments
                .get(&roi)
                .ok_or_else(|| Error::Config(format!("region '{}' missing", roi.as_str())))?;
            if members.is_empty() {
                return Err(Error::Config(format!("region '{}' is empty", roi.as_str())));
            }
        }
        let central = &assignments[&Roi::Central];
        for required in ["Cz", "FCz", "C3", "C4", "FC3", "FC4"] {
            if !central.iter().any(|c| c == required) {
                return Err(Error::Config(format!(
                    "central region must contain {required}"
                )));
            }
        }
        Ok(RoiMap { regions: assignments })
    }

    pub fn electrodes(&self, roi: Roi) -> &[String] {
        &self.regions[&roi]
    }

    /// Channel indices of a region within `channel_names`; errors if any
    /// member electrode is absent from the montage.
    pub fn indices(&self, roi: Roi, channel_names: &[String]) -> Result<Vec<usize>> {
        self.regions[&roi]
            .iter()
            .map(|name| {
                channel_names.iter().position(|c| c == name).ok_or_else(|| {
                    Error::Config(format!(
                        "electrode '{name}' of region '{}' not in montage",
                        roi.as_str()
                    ))
                })
            })
            .collect()
    }

    /// Validates that every assigned electrode exists in the montage.
    pub fn validate_against(&self, channel_names: &[String]) -> Result<()> {
        for roi in Roi::ALL {
            self.indices(roi, channel_names)?;
        }
        Ok(())
    }
}

/// Convenience: shared default montage channel list.
pub fn default_montage() -> Arc<Vec<String>> {
    Arc::new(default_channel_names())
}
