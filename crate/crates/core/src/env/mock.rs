//! Seeded stand-in for a completion model.
//!
//! Replies are a pure function of `(profile, prompt, purpose, sample)`, so the
//! mock is safe behind a cache and reproducible across runs.
//!
//! Each catalyst in the vocabulary is assigned a hidden tier per seed. Answer
//! requests read the prompt's property statements, turn them into a target tier
//! through the landscape, and list catalysts from that tier. Reward requests
//! report energies whose magnitude grows with the tier of each named catalyst.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, CompletionRequest, EnvError, Purpose};
use crate::prompt::Vocabulary;

const CATALYSTS: &[&str] = &[
    "Pt", "Pd", "Ni", "Cu", "Co", "Fe", "Ru", "Rh", "Ir", "Ag", "Au", "Zn", "Mo", "W", "Re", "Os",
    "Ti", "V", "Cr", "Mn", "PtNi", "PtCo", "PtRu", "PdCu", "PdAg", "NiFe", "NiMo", "CuZn", "CuNi",
    "CoMo", "FeCo", "RuCo", "RhNi", "IrRu", "AgAu", "AuCu", "ZnO", "CeO2", "TiO2", "ZrO2", "Fe3O4",
    "Co3O4", "MoS2", "WC", "Mo2C", "In2O3", "Ga2O3", "MgO", "Al2O3", "La2O3", "PtNiCo", "CuZnAl",
    "NiFeCo", "PdCuAu", "RuRhIr", "FeCoNi", "CuCeZr", "PtPdRh", "MoWNi", "CoFeMn",
];

const EXPLANATIONS: &[&str] = &[
    "binds the adsorbate at a moderate strength on its most exposed facet",
    "offers a favorable d-band center for this adsorbate",
    "provides abundant active sites and good thermal stability",
    "balances activity against cost and availability",
    "shows strong adsorption in reported surface studies",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Landscape {
    /// Every prompt draws from the lowest tier.
    Uniform,
    /// Tier grows with the number of refinements in the prompt.
    DepthMonotone,
    /// Tier equals the number of favored properties the prompt asks for.
    PropertyKeyed,
    /// One favored property scores highest; combinations dip before recovering.
    Deceptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockProfile {
    pub seed: u64,
    pub catalyst_vocabulary: Vec<String>,
    pub landscape: Landscape,
    /// Standard deviation of the Gaussian noise on each reported energy (eV).
    pub noise: f64,
    /// Magnitude of a lowest-tier energy (eV).
    pub base_energy: f64,
    /// Added magnitude per tier (eV).
    pub tier_bonus: f64,
    /// Size of the favored property subset; also the highest tier.
    pub favored_count: usize,
}

impl MockProfile {
    pub fn new(seed: u64, landscape: Landscape) -> Self {
        Self {
            seed,
            catalyst_vocabulary: CATALYSTS.iter().map(|s| s.to_string()).collect(),
            landscape,
            noise: 0.1,
            base_energy: 2.0,
            tier_bonus: 2.0,
            favored_count: 6,
        }
    }
}

/// Mock completion backend.
pub struct MockBackend {
    profile: MockProfile,
    /// Favored properties, tagged `+` (include) or `-` (exclude).
    favored: Vec<String>,
    /// Catalyst names grouped by tier.
    tiers: Vec<Vec<String>>,
}

fn stable_seed(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn regexes() -> &'static [Regex; 4] {
    static RE: OnceLock<[Regex; 4]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            Regex::new(r"top[- ](\d+)").unwrap(),
            Regex::new(r"include candidate catalysts with the following properties: ([^.]*)\.")
                .unwrap(),
            Regex::new(r"exclude candidate catalysts with the following properties: ([^.]*)\.")
                .unwrap(),
            Regex::new(r"following catalysts: (.*?)\. Return .*? only (\d+) numbers").unwrap(),
        ]
    })
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl MockBackend {
    pub fn new(profile: MockProfile) -> Result<Self, EnvError> {
        if profile.catalyst_vocabulary.is_empty() {
            return Err(EnvError::MalformedResponse(
                "mock profile needs a non-empty catalyst vocabulary".into(),
            ));
        }
        let seed = profile.seed.to_le_bytes();
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(&[b"profile", &seed]));

        let vocab = Vocabulary::default();
        let mut properties: Vec<String> = vocab
            .include_properties
            .iter()
            .map(|p| format!("+{p}"))
            .chain(vocab.exclude_properties.iter().map(|p| format!("-{p}")))
            .collect();
        properties.shuffle(&mut rng);
        properties.truncate(profile.favored_count);

        let mut names = profile.catalyst_vocabulary.clone();
        names.shuffle(&mut rng);
        let n_tiers = profile.favored_count + 1;
        let mut tiers = vec![Vec::new(); n_tiers];
        for (i, name) in names.into_iter().enumerate() {
            tiers[i % n_tiers].push(name);
        }
        Ok(Self {
            profile,
            favored: properties,
            tiers,
        })
    }

    pub fn profile(&self) -> &MockProfile {
        &self.profile
    }

    /// The favored property subset, tagged `+name` for include and `-name` for exclude.
    pub fn favored_properties(&self) -> &[String] {
        &self.favored
    }

    pub fn tier_of(&self, catalyst: &str) -> usize {
        self.tiers
            .iter()
            .position(|t| t.iter().any(|c| c == catalyst))
            .unwrap_or(0)
    }

    fn max_tier(&self) -> usize {
        self.tiers.len() - 1
    }

    /// Tier an answer to this prompt is drawn from.
    pub fn prompt_tier(&self, prompt: &str) -> usize {
        let [_, inc_re, exc_re, _] = regexes();
        let grab = |re: &Regex| {
            re.captures(prompt)
                .map(|c| split_list(&c[1]))
                .unwrap_or_default()
        };
        let include = grab(inc_re);
        let exclude = grab(exc_re);
        let matched = include
            .iter()
            .map(|p| format!("+{p}"))
            .chain(exclude.iter().map(|p| format!("-{p}")))
            .filter(|p| self.favored.contains(p))
            .count();
        let max = self.max_tier();
        match self.profile.landscape {
            Landscape::Uniform => 0,
            Landscape::PropertyKeyed => matched.min(max),
            Landscape::DepthMonotone => {
                let mut refinements = include.len() + exclude.len();
                refinements += usize::from(prompt.contains("metal oxide"));
                refinements += usize::from(
                    ["unary catalysts", "binary catalysts", "trinary catalysts"]
                        .iter()
                        .any(|l| prompt.contains(l)),
                );
                refinements += usize::from(prompt.contains(" ["));
                refinements.min(max)
            }
            Landscape::Deceptive => match matched {
                0 => 0,
                1 => max,
                n => (n - 2).min(max),
            },
        }
    }

    fn rng_for(&self, request: &CompletionRequest, tag: &[u8]) -> ChaCha8Rng {
        let seed = stable_seed(&[
            tag,
            &self.profile.seed.to_le_bytes(),
            request.prompt.as_bytes(),
            &request.sample.to_le_bytes(),
        ]);
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn answer(&self, request: &CompletionRequest) -> String {
        let [top_re, ..] = regexes();
        let k = top_re
            .captures(&request.prompt)
            .and_then(|c| c[1].parse::<usize>().ok())
            .unwrap_or(5)
            .max(1);
        let tier = self.prompt_tier(&request.prompt);
        let mut rng = self.rng_for(request, b"answer");

        let mut picks: Vec<String> = self.tiers[tier].clone();
        picks.shuffle(&mut rng);
        // Top up from neighbouring tiers when a tier is smaller than k.
        let mut offset = 1;
        while picks.len() < k && offset <= self.max_tier() {
            for t in [tier.checked_sub(offset), Some(tier + offset)]
                .into_iter()
                .flatten()
            {
                if let Some(extra) = self.tiers.get(t) {
                    picks.extend(extra.iter().cloned());
                }
            }
            offset += 1;
        }
        picks.truncate(k);

        let mut out = format!("Here are the top {k} candidates and their explanations:\n");
        for (i, name) in picks.iter().enumerate() {
            let why = EXPLANATIONS[rng.random_range(0..EXPLANATIONS.len())];
            out.push_str(&format!("{}. {name}: {why}.\n", i + 1));
        }
        out
    }

    fn reward(&self, request: &CompletionRequest) -> String {
        let [.., list_re] = regexes();
        let (names, n) = match list_re.captures(&request.prompt) {
            Some(c) => {
                let names = split_list(&c[1]);
                let n = c[2].parse::<usize>().unwrap_or(names.len());
                (names, n)
            }
            None => (Vec::new(), 1),
        };
        let mut rng = self.rng_for(request, b"reward");
        let normal = Normal::new(0.0, self.profile.noise.max(0.0)).expect("finite noise");
        let energies: Vec<String> = (0..n)
            .map(|i| {
                let name = names.get(i).map(String::as_str).unwrap_or("");
                let jitter =
                    (stable_seed(&[b"jitter", &self.profile.seed.to_le_bytes(), name.as_bytes()])
                        % 1000) as f64
                        / 1000.0;
                let magnitude = self.profile.base_energy * (1.0 + 0.25 * jitter)
                    + self.profile.tier_bonus * self.tier_of(name) as f64
                    + normal.sample(&mut rng);
                format!("{:.4}", -magnitude.abs())
            })
            .collect();
        format!("[{}]", energies.join(", "))
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        request.validate()?;
        Ok(match request.purpose {
            Purpose::Answer => self.answer(request),
            Purpose::Reward => self.reward(request),
        })
    }

    fn fingerprint(&self) -> String {
        format!(
            "mock:seed={}:landscape={:?}:noise={}",
            self.profile.seed, self.profile.landscape, self.profile.noise
        )
    }
}
