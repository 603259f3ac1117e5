use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use regop::cp::{cb_norm, is_cp, kraus, sp_op_norm, LinearMap, NormBracket, SearchBudget};
use regop::extension::{extend, ExtensionOptions, SubspaceBasis, SubspaceMap};
use regop::io;
use regop::linalg::PExponent;
use regop::random::{random_block, random_cp_map, random_map, seeded};
use regop::regular::{decompose_cp, regular_bracket, regular_upper, RegularOptions};
use regop::report::{complex, document, exponent, number, regular_fields};
use regop::rho::{duality_check, pairing_value, rho_upper, PairingElement, RhoOptions};
use regop::verify::{run_criterion, CRITERIA};
use regop::vnorm::{vnorm_bracket, LowerOptions, UpperOptions};
use regop::{Error, Result};
use serde_json::{json, Map, Value};

use crate::{Command, GenKind, Output};

/// Malformed input is a usage error; everything else is a computation failure.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format { .. } | Error::Io(_) | Error::InvalidExponent(_) | Error::Dimension(_) => 2,
        _ => 1,
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_doc(output: &Output, command: &str, fields: Map<String, Value>) -> Result<ExitCode> {
    emit(output, &io::to_text(&document(command, fields)))?;
    Ok(ExitCode::SUCCESS)
}

fn fields(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("report bodies are objects"),
    }
}

fn bracket_fields(p: PExponent, b: &NormBracket) -> Map<String, Value> {
    fields(json!({
        "p": exponent(p),
        "lower": number(b.lower),
        "upper": number(b.upper),
        "levels": [],
        "certificate": b.upper_witness,
        "lower_witness": b.lower_witness,
    }))
}

fn read_pairing(path: &Path, p: PExponent) -> Result<PairingElement> {
    Ok(PairingElement::new(io::read_block(path)?, p))
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Vnorm {
            input,
            p,
            restarts,
            seed,
            tol,
            output,
        } => {
            let x = io::read_block(&input)?;
            let upper = UpperOptions {
                seed,
                tol,
                ..UpperOptions::default()
            };
            let lower = LowerOptions {
                starts: restarts,
                seed,
                ..LowerOptions::default()
            };
            let (b, f) = vnorm_bracket(&x, p, &upper, &lower)?;
            let mut m = bracket_fields(p, &b);
            m.insert("factorization_value".into(), number(f.value));
            emit_doc(&output, "vnorm", m)
        }
        Command::Rho {
            input,
            p,
            restarts,
            seed,
            output,
        } => {
            let a = read_pairing(&input, p)?;
            let opts = RhoOptions {
                restarts,
                seed,
                ..RhoOptions::default()
            };
            let r = rho_upper(&a, &opts);
            let w = &r.witness;
            let m = fields(json!({
                "p": exponent(p),
                "upper": number(r.value),
                "levels": [],
                "certificate": "five-factor factorization",
                "witness": {
                    "gamma": io::matrix_to_json(&w.gamma),
                    "alpha": io::matrix_to_json(&w.alpha),
                    "g": io::matrix_to_json(&w.g),
                    "beta": io::matrix_to_json(&w.beta),
                    "delta": io::matrix_to_json(&w.delta),
                },
            }));
            emit_doc(&output, "rho", m)
        }
        Command::Cbnorm { map, output } => {
            let u = io::read_map(&map)?;
            let c = cb_norm(&u)?;
            let m = fields(json!({
                "p": "inf",
                "upper": number(c.value),
                "levels": [],
                "certificate": "positive block certificate",
                "status": c.status,
            }));
            emit_doc(&output, "cbnorm", m)
        }
        Command::Cpcheck { map, tol, output } => {
            let u = io::read_map(&map)?;
            let c = is_cp(&u, tol);
            let summary = if c.is_cp {
                format!("CP, margin {}", number(c.margin))
            } else {
                format!("not CP, margin {}", number(c.margin))
            };
            let m = fields(json!({
                "is_cp": c.is_cp,
                "margin": number(c.margin),
                "summary": summary,
            }));
            emit_doc(&output, "cpcheck", m)
        }
        Command::Kraus { map, tol, output } => {
            let u = io::read_map(&map)?;
            let k = kraus(&u, tol)?;
            let ops: Vec<Value> = k.ops.iter().map(io::matrix_to_json).collect();
            let m = fields(json!({ "count": ops.len(), "operators": ops }));
            emit_doc(&output, "kraus", m)
        }
        Command::Spnorm {
            map,
            p,
            restarts,
            seed,
            output,
        } => {
            let u = io::read_map(&map)?;
            let budget = SearchBudget {
                restarts,
                seed,
                ..SearchBudget::default()
            };
            let b = sp_op_norm(&u, p, &budget)?;
            emit_doc(&output, "spnorm", bracket_fields(p, &b))
        }
        Command::Regnorm {
            map,
            p,
            levels,
            restarts,
            seed,
            output,
        } => {
            let u = io::read_map(&map)?;
            let opts = RegularOptions {
                levels,
                starts: restarts,
                seed,
                ..RegularOptions::default()
            };
            let r = regular_bracket(&u, p, &opts)?;
            emit_doc(&output, "regnorm", regular_fields(&r))
        }
        Command::Decompose { map, p, output } => {
            let u = io::read_map(&map)?;
            let d = decompose_cp(&u, p)?;
            let parts: Vec<Value> = d.parts.iter().map(io::map_to_json).collect();
            let m = fields(json!({
                "p": exponent(p),
                "value": number(d.value),
                "objective": number(d.objective),
                "status": d.status,
                "parts": parts,
            }));
            emit_doc(&output, "decompose", m)
        }
        Command::Pair {
            map,
            input,
            p,
            seed,
            tol,
            output,
        } => {
            let u = io::read_map(&map)?;
            let a = read_pairing(&input, p)?;
            let v = pairing_value(&u, &a)?;
            let rho = rho_upper(
                &a,
                &RhoOptions {
                    seed,
                    ..RhoOptions::default()
                },
            );
            let reg = regular_upper(&u, p, &RegularOptions::default())?;
            let d = duality_check(v.direct, rho.value, reg.upper, tol);
            let m = fields(json!({
                "p": exponent(p),
                "pairing": complex(v.direct),
                "pairing_via_witness": complex(v.via_witness),
                "rho_upper": number(rho.value),
                "regular_upper": number(reg.upper),
                "bound": number(d.bound),
                "holds": d.holds,
            }));
            emit_doc(&output, "pair", m)
        }
        Command::Extend {
            subspace,
            p,
            levels,
            restarts,
            seed,
            output,
        } => {
            let f = io::read_subspace_map(&subspace)?;
            let opts = ExtensionOptions {
                levels,
                starts: restarts,
                seed,
                ..ExtensionOptions::default()
            };
            let r = extend(&f, p, &opts)?;
            let m = fields(json!({
                "p": exponent(p),
                "lower": number(r.subspace_lower),
                "upper": number(r.upper),
                "levels": [],
                "certificate": r.certificate,
                "gap": number(r.gap),
                "restriction_residual": number(r.restriction_residual),
                "extension": io::map_to_json(&r.extension),
            }));
            emit_doc(&output, "extend", m)
        }
        Command::Gen {
            kind,
            n,
            m,
            rank,
            seed,
            output,
        } => {
            if n == 0 || m == 0 || rank == 0 {
                return Err(Error::Dimension(
                    "dimensions and rank must be positive".into(),
                ));
            }
            let mut rng = seeded(seed);
            let v = match kind {
                GenKind::Map => io::map_to_json(&random_map(&mut rng, n, m)),
                GenKind::CpMap => io::map_to_json(&random_cp_map(&mut rng, n, m, rank)),
                GenKind::Block => io::block_to_json(&random_block(&mut rng, n, m)),
                GenKind::SubspaceMap => {
                    let u: LinearMap = random_map(&mut rng, n, m);
                    let f = SubspaceMap::restrict(&u, SubspaceBasis::upper_triangular(n))?;
                    io::subspace_map_to_json(&f)
                }
            };
            emit(&output, &io::to_text(&v))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            seed,
            criteria,
            json,
            output,
        } => {
            let ids: Vec<u8> = if criteria.is_empty() {
                CRITERIA.iter().map(|c| c.0).collect()
            } else {
                criteria
            };
            let outcomes: Vec<_> = ids.iter().map(|&id| run_criterion(id, seed)).collect();
            let all = outcomes.iter().all(|o| o.passed);
            let text = if json {
                let m = fields(json!({
                    "seed": seed,
                    "passed": all,
                    "criteria": outcomes,
                }));
                io::to_text(&document("verify", m))
            } else {
                let mut s: String = outcomes.iter().map(|o| format!("{o}\n")).collect();
                let n_pass = outcomes.iter().filter(|o| o.passed).count();
                s.push_str(&format!("{n_pass}/{} criteria passed\n", outcomes.len()));
                s
            };
            emit(&output, &text)?;
            Ok(if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
