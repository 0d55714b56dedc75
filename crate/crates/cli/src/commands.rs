use std::fs;
use std::io::Write;
use std::path::Path;

use distval::builders::{spec_shape, WeightedOrder};
use distval::verify::{fidelity_trace, run_property_suite, GumbelOutcomeOracle, PropertyId, Scheme, Status, SuiteConfig};
use distval::{
    build_game, exact_value, mc_value, mc_value_sampled, set_enum_limit, CoalitionStructure, DistValue, Error,
    SpecFile, StochasticGame, StructureSpec,
};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::{Cli, EnumerateArgs, Estimation, ExplainArgs, FidelityArgs, Format, GameArgs, Mode, Output, VerifyArgs};
use crate::report::{self, PlayerResult, Provenance};

pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_SPEC: u8 = 2;
pub const EXIT_ORACLE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn spec(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SPEC,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::OracleFailure(_) | Error::BridgeStartFailure(_) | Error::ProtocolViolation(_) | Error::Timeout(_) => {
                EXIT_ORACLE
            }
            Error::NormalizationFailure(_) | Error::NonFinite => EXIT_NUMERIC,
            _ => EXIT_SPEC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

/// Applies `DISTVAL_ENUM_LIMIT` and builds the worker pool.
pub fn configure(cli: &Cli) -> Result<rayon::ThreadPool, Failure> {
    if let Ok(text) = std::env::var("DISTVAL_ENUM_LIMIT") {
        let limit = text
            .trim()
            .parse()
            .map_err(|_| Failure::spec(format!("DISTVAL_ENUM_LIMIT: not a number: {text:?}")))?;
        set_enum_limit(limit)?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::spec("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    pool.build().map_err(|e| Failure::spec(format!("thread pool: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))
}

struct Loaded {
    spec: SpecFile,
    spec_sha256: String,
}

fn load_spec(path: &Path) -> Result<Loaded, Failure> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))?;
    let spec = SpecFile::from_json(text).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        spec,
        spec_sha256: sha256_hex(&bytes),
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, Failure> {
    serde_json::from_slice(bytes).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))
}

/// Resolves a `--structure` selector. File payloads are the bare contents of
/// the corresponding spec variant.
fn parse_structure(selector: &str) -> Result<(StructureSpec, Option<String>), Failure> {
    match selector {
        "shapley" => return Ok((StructureSpec::Shapley {}, None)),
        "loo" | "leave_one_out" => return Ok((StructureSpec::Loo {}, None)),
        _ => {}
    }
    let (kind, file) = selector
        .split_once(':')
        .ok_or_else(|| Failure::spec(format!("unknown structure {selector:?}")))?;
    let path = Path::new(file);
    let bytes = read(path)?;
    let spec = match kind {
        "weights" => StructureSpec::Weights {
            weights: parse_json(path, &bytes)?,
        },
        "perm" => StructureSpec::Perm {
            perms: parse_json::<Vec<WeightedOrder>>(path, &bytes)?,
        },
        "custom" => StructureSpec::Custom {
            tables: parse_json(path, &bytes)?,
        },
        _ => return Err(Failure::spec(format!("unknown structure kind {kind:?}"))),
    };
    Ok((spec, Some(sha256_hex(&bytes))))
}

fn resolve_structure(selector: Option<&str>, from_spec: Option<&StructureSpec>) -> Result<(StructureSpec, Option<String>), Failure> {
    match (selector, from_spec) {
        (Some(s), _) => parse_structure(s),
        (None, Some(s)) => Ok((s.clone(), None)),
        (None, None) => Ok((StructureSpec::Shapley {}, None)),
    }
}

struct Setup {
    game: StochasticGame,
    structure: CoalitionStructure,
    provenance: Provenance,
}

fn setup(args: &GameArgs, command: &'static str, estimation: Option<&Estimation>) -> Result<Setup, Failure> {
    let loaded = load_spec(&args.game)?;
    let (structure_spec, structure_sha256) = resolve_structure(args.structure.as_deref(), loaded.spec.structure.as_ref())?;
    if let Some(e) = estimation {
        check_estimation(e)?;
    }
    let (n, _) = spec_shape(&loaded.spec.game)?;
    let structure = structure_spec.build(n)?;
    let game = build_game(&loaded.spec.game)?;
    let provenance = Provenance {
        command,
        spec_sha256: Some(loaded.spec_sha256),
        structure: Some(structure.kind().name()),
        structure_sha256,
        mode: estimation.map(|e| e.mode.name()),
        seed: estimation.map(|e| e.seed),
        samples: estimation.and_then(|e| e.samples),
        seeds: estimation.and_then(|e| e.seeds),
    };
    Ok(Setup {
        game,
        structure,
        provenance,
    })
}

fn check_estimation(e: &Estimation) -> Result<(), Failure> {
    let positive = |flag: &str, v: Option<usize>| match v {
        Some(0) => Err(Failure::spec(format!("--{flag} must be at least 1"))),
        Some(_) => Ok(()),
        None => Err(Failure::spec(format!("--mode {} requires --{flag}", e.mode.name()))),
    };
    match e.mode {
        Mode::Exact => Ok(()),
        Mode::Mc => positive("samples", e.samples),
        Mode::Sampled => {
            positive("samples", e.samples)?;
            positive("seeds", e.seeds)
        }
    }
}

fn parse_players(selector: &str, n: usize) -> Result<Vec<usize>, Failure> {
    if selector == "all" {
        return Ok((0..n).collect());
    }
    let i: usize = selector
        .parse()
        .map_err(|_| Failure::spec(format!("--player must be an index or `all`, got {selector:?}")))?;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n_players: n }.into());
    }
    Ok(vec![i])
}

/// A value with per-entry standard errors in mc mode.
type Estimated = (DistValue, Option<Vec<f64>>);

fn compute_values(
    game: &StochasticGame,
    p: &CoalitionStructure,
    players: &[usize],
    e: &Estimation,
) -> Result<Vec<Estimated>, Failure> {
    match e.mode {
        Mode::Exact => Ok(players
            .iter()
            .map(|&i| exact_value(game, p, i).map(|v| (v, None)))
            .collect::<Result<_, _>>()?),
        Mode::Mc => {
            let est = mc_value(game, p, players, e.samples.unwrap_or_default(), e.seed)?;
            Ok(est.values.into_iter().zip(est.std_errors.into_iter().map(Some)).collect())
        }
        Mode::Sampled => {
            let oracle = GumbelOutcomeOracle::new(game.clone())?;
            let (k, r) = (e.samples.unwrap_or_default(), e.seeds.unwrap_or_default());
            Ok(players
                .iter()
                .map(|&i| mc_value_sampled(&oracle, p, i, k, r, e.seed).map(|q| (DistValue::Categorical(q), None)))
                .collect::<Result<_, _>>()?)
        }
    }
}

/// Writes the rendered result; nothing is created before this point.
fn emit(output: &Output, body: &[u8]) -> Result<(), Failure> {
    if output.out.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(body)
            .and_then(|_| out.flush())
            .map_err(|e| Failure::spec(format!("stdout: {e}")));
    }
    fs::write(&output.out, body).map_err(|e| Failure::spec(format!("{}: {e}", output.out.display())))
}

fn render_json(value: &Value) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text.into_bytes()
}

pub fn explain(args: &ExplainArgs) -> Outcome {
    let s = setup(&args.game, "explain", Some(&args.estimation))?;
    let players = parse_players(&args.player, s.game.n_players())?;
    let values = compute_values(&s.game, &s.structure, &players, &args.estimation)?;
    let results: Vec<PlayerResult> = players
        .iter()
        .zip(values)
        .map(|(&player, (value, std_errors))| PlayerResult {
            player,
            value,
            std_errors,
        })
        .collect();
    let body = match args.output.format {
        Format::Json => render_json(&report::explain_json(&s.provenance, &s.game, &results, args.top_k)?),
        Format::Csv => report::explain_csv(&results).into_bytes(),
    };
    emit(&args.output, &body)?;
    Ok(0)
}

pub fn verify(args: &VerifyArgs) -> Outcome {
    let properties = if args.suite == "all" {
        PropertyId::ALL.to_vec()
    } else {
        args.suite
            .split(',')
            .map(|s| s.trim().parse::<PropertyId>())
            .collect::<Result<Vec<_>, _>>()?
    };
    if args.trials == 0 {
        return Err(Failure::spec("--trials must be at least 1"));
    }
    let (structure, structure_sha256) = match args.structure.as_deref() {
        Some(sel) => {
            let (spec, sha) = parse_structure(sel)?;
            (Some(spec), sha)
        }
        None => (None, None),
    };
    let cfg = SuiteConfig {
        properties,
        seed: args.seed,
        trials: args.trials,
        structure: structure.clone(),
    };
    let reports = run_property_suite(&cfg);
    let failed = reports.iter().any(|r| r.status == Status::Fail);
    let provenance = Provenance {
        command: "verify",
        spec_sha256: None,
        structure: structure.as_ref().map(StructureSpec::name),
        structure_sha256,
        mode: None,
        seed: Some(args.seed),
        samples: None,
        seeds: None,
    };
    let body = match args.output.format {
        Format::Json => render_json(&report::verify_json(&provenance, args.trials, &reports)),
        Format::Csv => report::verify_csv(&reports).into_bytes(),
    };
    emit(&args.output, &body)?;
    for r in reports.iter().filter(|r| r.status == Status::Fail) {
        eprintln!("distval: {} failed: max deviation {:e} > {:e}", r.property, r.max_dev, r.tol);
    }
    Ok(if failed { EXIT_VERIFY_FAILED } else { 0 })
}

fn parse_classes(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::spec(format!("--fidelity-classes expects C1,C2, got {text:?}"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

fn parse_schemes(text: &str) -> Result<Vec<Scheme>, Failure> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    Ok(text
        .split(',')
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn fidelity(args: &FidelityArgs) -> Outcome {
    let (c1, c2) = parse_classes(&args.fidelity_classes)?;
    let schemes = parse_schemes(&args.scheme)?;
    let s = setup(&args.game, "fidelity", Some(&args.estimation))?;
    let n = s.game.n_players();
    let steps = args.steps.unwrap_or(n);
    let players: Vec<usize> = (0..n).collect();
    let values = compute_values(&s.game, &s.structure, &players, &args.estimation)?
        .into_iter()
        .map(|(v, _)| match v {
            DistValue::Categorical(q) => Ok(q),
            other => Err(Error::UnsupportedFamily(other.family().to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let traces = schemes
        .iter()
        .map(|&scheme| fidelity_trace(&s.game, &values, c1, c2, scheme, steps))
        .collect::<Result<Vec<_>, _>>()?;
    let body = match args.output.format {
        Format::Json => render_json(&report::fidelity_json(&s.provenance, c1, c2, &traces)),
        Format::Csv => report::fidelity_csv(&traces).into_bytes(),
    };
    emit(&args.output, &body)?;
    Ok(0)
}

pub fn enumerate_structure(args: &EnumerateArgs) -> Outcome {
    let loaded = load_spec(&args.game.game)?;
    let (structure_spec, structure_sha256) =
        resolve_structure(args.game.structure.as_deref(), loaded.spec.structure.as_ref())?;
    let (n, _) = spec_shape(&loaded.spec.game)?;
    let p = structure_spec.build(n)?;
    let provenance = Provenance {
        command: "enumerate-structure",
        spec_sha256: Some(loaded.spec_sha256),
        structure: Some(p.kind().name()),
        structure_sha256,
        mode: None,
        seed: None,
        samples: None,
        seeds: None,
    };
    let supports = (0..n).map(|i| p.support(i)).collect::<Result<Vec<_>, _>>()?;
    let body = match args.output.format {
        Format::Json => render_json(&report::structure_json(&provenance, &p, &supports)?),
        Format::Csv => report::structure_csv(&supports).into_bytes(),
    };
    emit(&args.output, &body)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::SpecValidation("x".into())), EXIT_SPEC);
        assert_eq!(code(Error::InvalidClasses("x".into())), EXIT_SPEC);
        assert_eq!(code(Error::TooManyPlayers { n: 40, limit: 20 }), EXIT_SPEC);
        assert_eq!(code(Error::OracleFailure("x".into())), EXIT_ORACLE);
        assert_eq!(code(Error::BridgeStartFailure("x".into())), EXIT_ORACLE);
        assert_eq!(code(Error::ProtocolViolation("x".into())), EXIT_ORACLE);
        assert_eq!(code(Error::Timeout(std::time::Duration::from_secs(1))), EXIT_ORACLE);
        assert_eq!(code(Error::NormalizationFailure(0.9)), EXIT_NUMERIC);
        assert_eq!(code(Error::NonFinite), EXIT_NUMERIC);
    }

    #[test]
    fn player_selector() {
        assert_eq!(parse_players("all", 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_players("1", 3).unwrap(), vec![1]);
        assert!(parse_players("3", 3).is_err());
        assert!(parse_players("first", 3).is_err());
    }

    #[test]
    fn class_and_scheme_selectors() {
        assert_eq!(parse_classes("2, 0").unwrap(), (2, 0));
        assert!(parse_classes("2").is_err());
        assert_eq!(parse_schemes("all").unwrap(), Scheme::ALL.to_vec());
        assert_eq!(parse_schemes("B").unwrap(), vec![Scheme::B]);
        assert!(parse_schemes("D").is_err());
    }
}
