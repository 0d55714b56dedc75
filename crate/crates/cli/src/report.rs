//! JSON and CSV renderings of command results.
//!
//! CSV layouts (header rows are fixed):
//! - explain, categorical: `player,from,to,prob`, all `d²` entries
//! - explain, bernoulli: `player,outcome,prob` with outcomes `1,-1,0`
//! - explain, gaussian: `player,component,weight,mean,sd`
//! - verify: `property,status,max_dev,tol`
//! - fidelity: `step,scheme,removed_player,p_c1,p_c2`
//! - enumerate-structure: `player,coalition,prob`

use std::fmt::Write;

use distval::verify::{FidelityTrace, PropertyReport};
use distval::{
    abs_importance, entropy, expectation, flip_away, importance, mode_change, top_transitions, variance, Coalition,
    CoalitionStructure, DistValue, StochasticGame, Transition,
};
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Provenance {
    pub command: &'static str,
    pub spec_sha256: Option<String>,
    pub structure: Option<&'static str>,
    pub structure_sha256: Option<String>,
    pub mode: Option<&'static str>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub seeds: Option<usize>,
}

impl Provenance {
    fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "spec_sha256": self.spec_sha256,
            "structure": self.structure,
            "structure_sha256": self.structure_sha256,
            "mode": self.mode,
            "seed": self.seed,
            "samples": self.samples,
            "seeds": self.seeds,
        })
    }
}

fn envelope(provenance: &Provenance) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(provenance.command));
    m.insert("provenance".into(), provenance.to_json());
    m
}

pub struct PlayerResult {
    pub player: usize,
    pub value: DistValue,
    pub std_errors: Option<Vec<f64>>,
}

fn transition_json(t: &Transition) -> Value {
    json!({"from": t.from, "to": t.to, "prob": t.prob})
}

/// Family-specific payload. Categorical matrices are indexed
/// `transition[to][from]`: rows are the class with the player, columns the
/// class without.
fn value_json(value: &DistValue) -> Value {
    match value {
        DistValue::Bernoulli(b) => json!({
            "family": "bernoulli",
            "q_plus": b.q_plus,
            "q_minus": b.q_minus,
            "q_zero": b.q_zero,
        }),
        DistValue::Gaussian(g) => json!({
            "family": "gaussian",
            "components": g.components.iter().map(|c| json!({"weight": c.weight, "mean": c.mean, "sd": c.sd})).collect::<Vec<_>>(),
            "sign_pmf": {"negative": g.sign_pmf[0], "zero": g.sign_pmf[1], "positive": g.sign_pmf[2]},
        }),
        DistValue::Categorical(q) => json!({
            "family": "categorical",
            "d": q.d(),
            "transition": q.as_slice().chunks(q.d()).collect::<Vec<_>>(),
            "p_zero": q.p_zero(),
        }),
    }
}

fn player_json(r: &PlayerResult, top_k: usize) -> Value {
    let v = &r.value;
    let mut m = Map::new();
    m.insert("player".into(), json!(r.player));
    m.insert("value".into(), value_json(v));
    m.insert("importance".into(), json!(importance(v)));
    m.insert("abs_importance".into(), json!(abs_importance(v)));
    m.insert("expectation".into(), json!(expectation(v)));
    if let Ok(var) = variance(v) {
        m.insert("variance".into(), json!(var));
    }
    if let Ok(h) = entropy(v) {
        m.insert("entropy".into(), json!(h));
    }
    if let Some(q) = v.as_categorical() {
        let (class, prob) = flip_away(q);
        m.insert("mode_change".into(), transition_json(&mode_change(q)));
        m.insert("flip_away".into(), json!({"class": class, "prob": prob}));
        let top: Vec<Value> = top_transitions(q, top_k).iter().map(transition_json).collect();
        m.insert("top_transitions".into(), Value::Array(top));
    }
    if let Some(se) = &r.std_errors {
        m.insert("std_errors".into(), json!(se));
    }
    Value::Object(m)
}

fn payoff_json(game: &StochasticGame, c: &Coalition) -> distval::Result<Value> {
    let params = match game.query_payoff(c) {
        Ok(p) => serde_json::to_value(p).expect("serializable"),
        Err(distval::Error::UnsupportedFamily(_)) if game.as_mixture().is_some() => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json!({"params": params, "expectation": game.expected_payoff(c)?}))
}

pub fn explain_json(
    provenance: &Provenance,
    game: &StochasticGame,
    results: &[PlayerResult],
    top_k: usize,
) -> distval::Result<Value> {
    let n = game.n_players();
    let family = game.family();
    let d = match family {
        distval::Family::Categorical { d } => Some(d),
        _ => None,
    };
    let mut m = envelope(provenance);
    m.insert(
        "game".into(),
        json!({
            "n_players": n,
            "family": family.name(),
            "d": d,
            "v_empty": payoff_json(game, &Coalition::empty(n)?)?,
            "v_grand": payoff_json(game, &Coalition::grand(n)?)?,
        }),
    );
    m.insert(
        "players".into(),
        Value::Array(results.iter().map(|r| player_json(r, top_k)).collect()),
    );
    Ok(Value::Object(m))
}

pub fn explain_csv(results: &[PlayerResult]) -> String {
    let mut out = String::new();
    let header = match results.first().map(|r| &r.value) {
        Some(DistValue::Bernoulli(_)) => "player,outcome,prob",
        Some(DistValue::Gaussian(_)) => "player,component,weight,mean,sd",
        _ => "player,from,to,prob",
    };
    out.push_str(header);
    out.push('\n');
    for r in results {
        let i = r.player;
        match &r.value {
            DistValue::Bernoulli(b) => {
                for (o, p) in [(1, b.q_plus), (-1, b.q_minus), (0, b.q_zero)] {
                    writeln!(out, "{i},{o},{p}").unwrap();
                }
            }
            DistValue::Gaussian(g) => {
                for (k, c) in g.components.iter().enumerate() {
                    writeln!(out, "{i},{k},{},{},{}", c.weight, c.mean, c.sd).unwrap();
                }
            }
            DistValue::Categorical(q) => {
                for from in 0..q.d() {
                    for to in 0..q.d() {
                        writeln!(out, "{i},{from},{to},{}", q.get(to, from)).unwrap();
                    }
                }
            }
        }
    }
    out
}

pub fn verify_json(provenance: &Provenance, trials: usize, reports: &[PropertyReport]) -> Value {
    let mut m = envelope(provenance);
    let passed = reports.iter().all(|r| r.status != distval::verify::Status::Fail);
    m.insert("trials".into(), json!(trials));
    m.insert("passed".into(), json!(passed));
    m.insert("properties".into(), serde_json::to_value(reports).expect("serializable"));
    Value::Object(m)
}

pub fn verify_csv(reports: &[PropertyReport]) -> String {
    let mut out = String::from("property,status,max_dev,tol\n");
    for r in reports {
        let status = serde_json::to_value(r.status).expect("serializable");
        writeln!(out, "{},{},{},{}", r.property, status.as_str().unwrap_or_default(), r.max_dev, r.tol).unwrap();
    }
    out
}

pub fn fidelity_json(provenance: &Provenance, c1: usize, c2: usize, traces: &[FidelityTrace]) -> Value {
    let mut m = envelope(provenance);
    m.insert("c1".into(), json!(c1));
    m.insert("c2".into(), json!(c2));
    let traces: Vec<Value> = traces
        .iter()
        .map(|t| {
            json!({
                "scheme": t.scheme.letter(),
                "ordering": t.scheme.id(),
                "order": t.order,
                "rows": t.rows.iter().map(|r| json!({
                    "step": r.step,
                    "removed_player": r.removed_player,
                    "p_c1": r.p_c1,
                    "p_c2": r.p_c2,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    m.insert("traces".into(), Value::Array(traces));
    Value::Object(m)
}

pub fn fidelity_csv(traces: &[FidelityTrace]) -> String {
    let mut out = String::from("step,scheme,removed_player,p_c1,p_c2\n");
    for t in traces {
        for r in &t.rows {
            let removed = r.removed_player.map(|p| p.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{removed},{},{}", r.step, t.scheme.letter(), r.p_c1, r.p_c2).unwrap();
        }
    }
    out
}

pub fn structure_json(
    provenance: &Provenance,
    p: &CoalitionStructure,
    supports: &[Vec<(Coalition, f64)>],
) -> distval::Result<Value> {
    let eff = p.is_efficient()?;
    let mut m = envelope(provenance);
    m.insert("n_players".into(), json!(p.n_players()));
    m.insert("efficient".into(), json!(eff.efficient));
    m.insert("symmetric".into(), json!(p.is_symmetric()?));
    let players: Vec<Value> = supports
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "player": i,
                "support": s.iter().map(|(c, w)| json!({"coalition": c.key(), "prob": w})).collect::<Vec<_>>(),
            })
        })
        .collect();
    m.insert("players".into(), Value::Array(players));
    Ok(Value::Object(m))
}

pub fn structure_csv(supports: &[Vec<(Coalition, f64)>]) -> String {
    let mut out = String::from("player,coalition,prob\n");
    for (i, s) in supports.iter().enumerate() {
        for (c, w) in s {
            writeln!(out, "{i},\"{}\",{w}", c.key()).unwrap();
        }
    }
    out
}
