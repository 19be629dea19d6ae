use serde::{Deserialize, Serialize};

use super::{validate_contamination, DetectError, EllipticEnvelope, IsolationForest, LocalOutlierFactor, OneClassSvm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemberKind {
    IsolationForest,
    OneClassSvm,
    Lof,
    EllipticEnvelope,
    IsolationForest2,
}

impl MemberKind {
    pub const ALL: [MemberKind; 5] = [
        MemberKind::IsolationForest,
        MemberKind::OneClassSvm,
        MemberKind::Lof,
        MemberKind::EllipticEnvelope,
        MemberKind::IsolationForest2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MemberKind::IsolationForest => "iforest",
            MemberKind::OneClassSvm => "ocsvm",
            MemberKind::Lof => "lof",
            MemberKind::EllipticEnvelope => "elliptic",
            MemberKind::IsolationForest2 => "iforest2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub n_trees: usize,
    pub max_samples: usize,
    pub nu: f64,
    pub rff_dim: usize,
    pub lof_k: usize,
    pub contamination: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_samples: 256, nu: 0.25, rff_dim: 256, lof_k: 20, contamination: 0.32, seed: 0 }
    }
}

/// Raw per-member anomaly scores for one sample, in [`MemberKind::ALL`]
/// order. Larger is more anomalous for every member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberScores(pub [f64; 5]);

/// Fraction of members voting anomalous.
pub fn vote_fraction(votes: &[bool; 5]) -> f64 {
    votes.iter().filter(|&&v| v).count() as f64 / 5.0
}

/// a2 for one sample: the ensemble's vote fraction.
pub fn ensemble_vote(bank: &EnsembleBank, z: &[f64]) -> Result<f64, DetectError> {
    Ok(vote_fraction(&bank.votes(z)?))
}

/// The five-member bank. Members are optional so a partially restored bank
/// reports which member is missing instead of panicking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBank {
    pub contamination: f64,
    pub iforest: Option<IsolationForest>,
    pub ocsvm: Option<OneClassSvm>,
    pub lof: Option<LocalOutlierFactor>,
    pub elliptic: Option<EllipticEnvelope>,
    pub iforest2: Option<IsolationForest>,
}

impl EnsembleBank {
    pub fn empty(contamination: f64) -> Self {
        Self { contamination, iforest: None, ocsvm: None, lof: None, elliptic: None, iforest2: None }
    }

    /// Fit all five members, each on its own thread.
    pub fn fit(train: &[Vec<f64>], cfg: &EnsembleConfig) -> Result<Self, DetectError> {
        if train.is_empty() {
            return Err(DetectError::EmptyTrainSet);
        }
        validate_contamination(cfg.contamination)?;
        let rho = cfg.contamination;
        let (a, b, c, d, e) = std::thread::scope(|s| {
            let a = s.spawn(|| IsolationForest::fit(train, rho, cfg.n_trees, cfg.max_samples, cfg.seed));
            let b = s.spawn(|| OneClassSvm::fit(train, cfg.nu, cfg.rff_dim, cfg.seed));
            let c = s.spawn(|| LocalOutlierFactor::fit(train, cfg.lof_k, rho));
            let d = s.spawn(|| EllipticEnvelope::fit(train, rho));
            let e = s.spawn(|| IsolationForest::fit(train, rho, cfg.n_trees, cfg.max_samples, cfg.seed + 1));
            (
                a.join().expect("iforest thread"),
                b.join().expect("ocsvm thread"),
                c.join().expect("lof thread"),
                d.join().expect("elliptic thread"),
                e.join().expect("iforest2 thread"),
            )
        });
        Ok(Self {
            contamination: rho,
            iforest: Some(a?),
            ocsvm: Some(b?),
            lof: Some(c?),
            elliptic: Some(d?),
            iforest2: Some(e?),
        })
    }

    fn member<T>(m: &Option<T>, kind: MemberKind) -> Result<&T, DetectError> {
        m.as_ref().ok_or_else(|| DetectError::UnfittedMember(kind.name().to_string()))
    }

    pub fn set_contamination(&mut self, rho: f64) -> Result<(), DetectError> {
        validate_contamination(rho)?;
        self.contamination = rho;
        Ok(())
    }

    pub fn raw_scores(&self, z: &[f64]) -> Result<MemberScores, DetectError> {
        Ok(MemberScores([
            Self::member(&self.iforest, MemberKind::IsolationForest)?.score(z)?,
            Self::member(&self.ocsvm, MemberKind::OneClassSvm)?.score(z)?,
            Self::member(&self.lof, MemberKind::Lof)?.score(z)?,
            Self::member(&self.elliptic, MemberKind::EllipticEnvelope)?.score(z)?,
            Self::member(&self.iforest2, MemberKind::IsolationForest2)?.score(z)?,
        ]))
    }

    /// Per-member vote thresholds at contamination `rho`. The one-class
    /// model's ν is fixed, so its threshold is always 0.
    pub fn thresholds_at(&self, rho: f64) -> Result<[f64; 5], DetectError> {
        Ok([
            Self::member(&self.iforest, MemberKind::IsolationForest)?.threshold_at(rho),
            {
                Self::member(&self.ocsvm, MemberKind::OneClassSvm)?;
                0.0
            },
            Self::member(&self.lof, MemberKind::Lof)?.threshold_at(rho),
            Self::member(&self.elliptic, MemberKind::EllipticEnvelope)?.threshold_at(rho),
            Self::member(&self.iforest2, MemberKind::IsolationForest2)?.threshold_at(rho),
        ])
    }

    pub fn thresholds(&self) -> Result<[f64; 5], DetectError> {
        self.thresholds_at(self.contamination)
    }

    pub fn votes_from_raw(raw: &MemberScores, thresholds: &[f64; 5]) -> [bool; 5] {
        std::array::from_fn(|i| raw.0[i] > thresholds[i])
    }

    pub fn votes(&self, z: &[f64]) -> Result<[bool; 5], DetectError> {
        Ok(Self::votes_from_raw(&self.raw_scores(z)?, &self.thresholds()?))
    }

    /// B1 score from the primary forest.
    pub fn a1(&self, z: &[f64]) -> Result<f64, DetectError> {
        Self::member(&self.iforest, MemberKind::IsolationForest)?.score(z)
    }

    /// Training-set raw scores per member, used to calibrate downstream
    /// transforms.
    pub fn training_scores(&self) -> Result<[Vec<f64>; 5], DetectError> {
        Ok([
            Self::member(&self.iforest, MemberKind::IsolationForest)?.calibration.training_scores().to_vec(),
            Self::member(&self.ocsvm, MemberKind::OneClassSvm)?.training_scores(),
            Self::member(&self.lof, MemberKind::Lof)?.training_scores().to_vec(),
            Self::member(&self.elliptic, MemberKind::EllipticEnvelope)?.training_scores().to_vec(),
            Self::member(&self.iforest2, MemberKind::IsolationForest2)?.calibration.training_scores().to_vec(),
        ])
    }
}
