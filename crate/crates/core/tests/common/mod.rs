#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use scenefuse::backend::{
    BackendClient, FixtureJudgeTransport, GenerationParams, PrefsFixture, PromptTemplates, Role, RoleBackend,
};
use scenefuse::prefs::BackendJudge;
use scenefuse::Transcript;

pub const SIX_SPEAKERS: [&str; 46] = [
    "Elwood", "Casey", "Elwood", "Casey", "Elwood", "Casey", "Elwood", "Casey", "Elwood", "Meg", "Paul", "Meg",
    "Paul", "Meg", "Paul", "Luke", "Meg", "Paul", "Luke", "Meg", "Luke", "Meg", "Luke", "Meg", "Luke", "Meg",
    "Paul", "Meg", "Luke", "Meg", "Luke", "Meg", "Luke", "Meg", "Luke", "Meg", "Luke", "Adam", "Gwen", "Adam",
    "Gwen", "Adam", "Gwen", "Adam", "Gwen", "Adam",
];

pub fn six_speakers() -> Transcript {
    Transcript::from_speakers(&SIX_SPEAKERS).unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random speaker sequence of `lines` lines over at most `speakers` names.
pub fn random_speakers(rng: &mut StdRng, lines: usize, speakers: usize) -> Vec<String> {
    (0..lines).map(|_| format!("S{}", rng.gen_range(0..speakers))).collect()
}

/// Backends over the fact-scoring fixture tables.
pub fn fact_scoring_judge() -> BackendJudge {
    let fixture = PrefsFixture::from_file(&fixture("fact_scoring").join("judge.json")).unwrap();
    judge_with(fixture)
}

pub fn judge_with(fixture: PrefsFixture) -> BackendJudge {
    let templates = PromptTemplates::default();
    let transport = FixtureJudgeTransport::new(fixture, templates.clone());
    let client = Arc::new(BackendClient::new(Role::FactExtractor, transport.clone()));
    let judge_client = Arc::new(BackendClient::new(Role::FactJudge, transport));
    BackendJudge {
        extractor: RoleBackend::new(
            client,
            templates.get(Role::FactExtractor).clone(),
            GenerationParams::default(),
        ),
        verifier: RoleBackend::new(judge_client, templates.get(Role::FactJudge).clone(), GenerationParams::default()),
    }
}

pub fn read_fixture(dir: &str, file: &str) -> String {
    std::fs::read_to_string(fixture(dir).join(file)).unwrap()
}
