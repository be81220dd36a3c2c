//! Schedules the checks of each requested suite on a scenario.

use nalgebra::DMatrix;

use super::report::{ConventionRecord, SuiteReport};
use super::scenario::{Scenario, Suite};
use crate::chart::{
    covariant_derivative_endo, covariant_derivative_metric, nijenhuis, nijenhuis_covariant_rhs, phi_of_tensor, riemann,
    torsion, ConnectionField, Tensor,
};
use crate::error::{Error, Result};
use crate::genbundle::{
    build_jc, build_jm, build_jp, check_anti_pseudo_calibrated, check_calibrated, derived_family, ghat_matrix,
    neutral_metric_g,
};
use crate::genconn::{
    dhat_endo, dhat_metric, gen_nijenhuis_basis, jc_conditions, jp_conditions, karaman_connection, max_norm,
    torsion_formula_d, BaseJets, ConditionContext, GenKind,
};
use crate::lifts::{
    check_frame_displays, check_lifted_structure, commutation_check, lift_structure, lifted_metric_components,
    lifted_nijenhuis, lifted_samples, Flavor, Lift, FIBRE_BOX,
};
use crate::metallic::{check_compatible, check_metallic, inverse_metallic, is_locally_metallic, product_from_metallic};
use crate::report::CheckReport;

/// Checks tagged with the suite that produced them.
type Batch = Vec<(Suite, CheckReport)>;

/// Runs every requested suite in declared order. Failures never abort the
/// remaining checks; set-up errors become failed checks.
type PairCheck<'a> = dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<f64> + 'a;

pub fn run_suites(s: &Scenario) -> SuiteReport {
    let samples = s.sample_points();
    let gamma = s.connection(&samples);
    let mut ctx = Context {
        s,
        samples,
        gamma,
        lifts: Vec::new(),
        conventions: Vec::new(),
    };
    let mut checks: Batch = Vec::new();
    for suite in &s.suites {
        let batch = match suite {
            Suite::Core => ctx.core(),
            Suite::Genbundle => ctx.genbundle(),
            Suite::Genconn => ctx.genconn(),
            Suite::Karaman => ctx.karaman(),
            Suite::LiftsTangent => ctx.lifts(Flavor::Tangent),
            Suite::LiftsCotangent => ctx.lifts(Flavor::Cotangent),
            Suite::Commutation => ctx.commutation(),
        };
        checks.extend(batch.into_iter().map(|c| (*suite, c)));
    }
    SuiteReport::assemble(s, checks, ctx.conventions)
}

struct Context<'a> {
    s: &'a Scenario,
    samples: Vec<Vec<f64>>,
    gamma: Result<ConnectionField>,
    lifts: Vec<(Flavor, Result<Lift>)>,
    conventions: Vec<ConventionRecord>,
}

fn e_vec(n: usize, i: usize) -> Vec<f64> {
    (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
}

/// Worst of per-sample reports; the first failing sample is kept as witness.
fn pointwise<F>(id: &str, anchor: &str, tol: f64, samples: &[Vec<f64>], mut f: F) -> CheckReport
where
    F: FnMut(&[f64]) -> Result<CheckReport>,
{
    let mut worst = 0.0_f64;
    let mut failed: Option<(Vec<f64>, Option<String>)> = None;
    for pt in samples {
        match f(pt) {
            Ok(r) => {
                worst = worst.max(r.residual_or_inf());
                if !r.passed && failed.is_none() {
                    failed = Some((pt.clone(), r.note));
                }
            }
            Err(e) => {
                let mut r = CheckReport::failed_with(id, anchor, tol, &e);
                r.witness.get_or_insert_with(|| pt.clone());
                return r;
            }
        }
    }
    let mut r = CheckReport::new(id, anchor, worst, tol);
    if let Some((pt, note)) = failed {
        r.passed = false;
        r.witness = Some(pt);
        r.note = note;
    }
    r
}

/// `1` when two verdicts disagree, else `0`.
fn tracks(a: &CheckReport, b: bool) -> f64 {
    if a.passed == b {
        0.0
    } else {
        1.0
    }
}

impl Context<'_> {
    fn tol(&self) -> f64 {
        self.s.tolerance
    }

    fn gamma(&self) -> std::result::Result<&ConnectionField, &Error> {
        self.gamma.as_ref()
    }

    fn core(&self) -> Vec<CheckReport> {
        let s = self.s;
        let tol = self.tol();
        let pts = &self.samples;
        let mut out = vec![
            check_metallic(&s.j, s.params, pts, tol),
            check_compatible(&s.j, &s.metric, pts, tol),
        ];
        let anchor = "nabla J = 0 (Levi-Civita)";
        out.push(
            is_locally_metallic(&s.j, &s.metric, pts, tol)
                .unwrap_or_else(|e| CheckReport::failed_with("metallic.locally_metallic", anchor, tol, &e)),
        );
        let anchor = "F = (2/(2σ−p)) J − (p/(2σ−p)) I satisfies F² = I";
        out.push(match product_from_metallic(&s.j, s.params) {
            Ok((f, _)) => CheckReport::over_samples("metallic.product", anchor, tol, pts, |pt| {
                let m = f.eval(pt)?;
                let n = m.nrows();
                Ok((&m * &m - DMatrix::identity(n, n)).amax())
            }),
            Err(e) => CheckReport::failed_with("metallic.product", anchor, tol, &e),
        });
        if s.params.q != 0.0 {
            let anchor = "J⁻¹ = (1/q) J − (p/q) I";
            out.push(match inverse_metallic(&s.j, s.params) {
                Ok(inv) => CheckReport::over_samples("metallic.inverse", anchor, tol, pts, |pt| {
                    let m = s.j.eval(pt)? * inv.eval(pt)?;
                    let n = m.nrows();
                    Ok((m - DMatrix::identity(n, n)).amax())
                }),
                Err(e) => CheckReport::failed_with("metallic.inverse", anchor, tol, &e),
            });
        }
        let anchor = "nabla g = 0";
        let metric = match self.gamma() {
            Ok(g) => {
                let dg = covariant_derivative_metric(g, &s.metric);
                CheckReport::over_samples("chart.metric_connection", anchor, tol, pts, |pt| Ok(dg.at(pt)?.max_abs()))
            }
            Err(e) => CheckReport::failed_with("chart.metric_connection", anchor, tol, e),
        };
        // only the Levi-Civita connection is metric by construction
        out.push(if s.connection.is_some() { metric.informational() } else { metric });
        let anchor = "curvature from symbolic Γ equals curvature from the numeric jet";
        out.push(match self.gamma() {
            Ok(g) => {
                let r = riemann(g);
                CheckReport::over_samples("chart.curvature_routes", anchor, tol, pts, |pt| {
                    let a = r.at(pt)?;
                    let b = r.at_via_jet(pt)?;
                    Ok(a.max_abs_diff(&b) / a.max_abs().max(1.0))
                })
            }
            Err(e) => CheckReport::failed_with("chart.curvature_routes", anchor, tol, e),
        });
        out
    }

    fn genbundle(&self) -> Vec<CheckReport> {
        let s = self.s;
        let tol = self.tol();
        let pts = &self.samples;
        let p = s.params;
        let n = s.dim();
        let pair = |pt: &[f64]| -> Result<(DMatrix<f64>, DMatrix<f64>)> { Ok((s.j.eval(pt)?, s.metric.eval(pt)?)) };
        let id2 = DMatrix::<f64>::identity(2 * n, 2 * n);
        let simple = |id: &str, anchor: &str, f: &PairCheck<'_>| {
            CheckReport::over_samples(id, anchor, tol, pts, |pt| {
                let (j, g) = pair(pt)?;
                f(&j, &g)
            })
        };
        vec![
            simple("genbundle.jm_metallic", "J_m² = p J_m + q I", &|j, g| Ok(build_jm(j, g, tol)?.metallic_residual(p))),
            simple("genbundle.jp_square", "J_p² = I", &|j, g| Ok(build_jp(j, g, tol)?.square_residual(1.0))),
            simple("genbundle.jc_square", "J_c² = −I", &|j, g| Ok(build_jc(j, g, tol)?.square_residual(-1.0))),
            simple("genbundle.anticommute", "J_c J_p = −J_p J_c", &|j, g| {
                let a = build_jp(j, g, tol)?;
                let b = build_jc(j, g, tol)?;
                Ok((b.matrix() * a.matrix() + a.matrix() * b.matrix()).amax())
            }),
            simple("genbundle.ghat_compatible", "ĝ(J_m σ, τ) = ĝ(σ, J_m τ)", &|j, g| {
                Ok(ghat_matrix(g)?.symmetry_residual(&build_jm(j, g, tol)?))
            }),
            simple(
                "genbundle.derived_family",
                "±((2σ−p)/2) F̂^± + (p/2) I and ±((2σ−p)/2) J_p + (p/2) I are metallic",
                &|j, g| {
                    let fam = derived_family(j, g, p, tol)?;
                    let mut r = (fam.f_hat_plus.matrix() * fam.f_hat_plus.matrix() - &id2).amax();
                    for e in fam.plus_m.iter().chain(&fam.minus_m).chain(&fam.jm) {
                        r = r.max(e.metallic_residual(p));
                    }
                    Ok(r)
                },
            ),
            pointwise("genbundle.neutral_signature", "G(σ, τ) = (σ, J_p τ) has signature (n, n)", tol, pts, |pt| {
                let (j, g) = pair(pt)?;
                let nm = neutral_metric_g(&build_jp(&j, &g, tol)?)?;
                let (pos, neg) = nm.signature;
                let r = CheckReport::new("", "", nm.asymmetry, tol);
                Ok(if pos == n && neg == n {
                    r
                } else {
                    CheckReport { passed: false, ..r }.with_note(format!("signature ({pos}, {neg})"))
                })
            }),
            pointwise(
                "genbundle.anti_pseudo_calibrated",
                "(J_p s, J_p t) = −(s, t) and (., J_p .) non-degenerate",
                tol,
                pts,
                |pt| {
                    let (j, g) = pair(pt)?;
                    Ok(check_anti_pseudo_calibrated(&build_jp(&j, &g, tol)?, tol))
                },
            ),
            pointwise(
                "genbundle.calibrated",
                "(J_c s, J_c t) = (s, t) and (., J_c .) positive definite",
                tol,
                pts,
                |pt| {
                    let (j, g) = pair(pt)?;
                    Ok(check_calibrated(&build_jc(&j, &g, tol)?, tol))
                },
            ),
        ]
    }

    fn genconn(&self) -> Vec<CheckReport> {
        let gamma = match self.gamma() {
            Ok(g) => g.clone(),
            Err(e) => return vec![CheckReport::failed_with("genconn.setup", "connection", self.tol(), e)],
        };
        let mut out = self.connection_checks("genconn", &gamma);
        out.extend(self.integrability_checks(&gamma));
        out
    }

    /// Checks shared by the scenario connection and the Karaman connection.
    fn connection_checks(&self, prefix: &str, d: &ConnectionField) -> Vec<CheckReport> {
        let s = self.s;
        let tol = self.tol();
        let pts = &self.samples;
        let n = s.dim();
        let id = |what: &str| format!("{prefix}.{what}");
        let mut out = Vec::new();

        let nij = nijenhuis(&s.j);
        out.push(CheckReport::over_samples(
            id("nijenhuis_covariant"),
            "N_J(X,Y) = (∇_{JX}J)Y − (∇_{JY}J)X + J(∇_Y J)X − J(∇_X J)Y + Φ(T)(X,Y)",
            tol,
            pts,
            |pt| {
                let a = nij.at(pt)?;
                let b = nijenhuis_covariant_rhs(&s.j, d, pt)?;
                Ok(a.max_abs_diff(&b))
            },
        ));

        let jets = match BaseJets::new(&s.j, &s.metric) {
            Ok(b) => b,
            Err(e) => {
                out.push(CheckReport::failed_with(id("setup"), "jets of J and g", tol, &e));
                return out;
            }
        };
        let nabla_j = covariant_derivative_endo(d, &s.j);
        out.push(CheckReport::over_samples(
            id("jm_nijenhuis_formula"),
            "N_{J_m}(X,Y) = N_J(X,Y), N_{J_m}(X,β) = β((∇_{JX}J) − (∇_X J)J), N_{J_m}(α,β) = 0",
            tol,
            pts,
            |pt| {
                let t = gen_nijenhuis_basis(&d.values(pt)?, &jets.at(pt)?.structure(GenKind::Jm));
                let nj = nij.at(pt)?;
                let dj = nabla_j.at(pt)?;
                let jm = s.j.eval(pt)?;
                let mut worst = 0.0_f64;
                for a in 0..n {
                    let ja = &jm * nalgebra::DVector::from_vec(e_vec(n, a));
                    let m = crate::chart::directional_endo(&dj, ja.as_slice()) - crate::chart::directional_endo(&dj, &e_vec(n, a)) * &jm;
                    for b in 0..n {
                        for c in 0..n {
                            worst = worst.max((t.get(&[c, a, b]) - nj.get(&[c, a, b])).abs());
                            worst = worst.max(t.get(&[n + c, a, b]).abs());
                            // covector component c of N(∂_a, dx^b) is M^b_c
                            worst = worst.max((t.get(&[n + c, a, n + b]) - m[(b, c)]).abs());
                            worst = worst.max(t.get(&[c, a, n + b]).abs());
                        }
                    }
                    for b in n..2 * n {
                        for c in 0..2 * n {
                            worst = worst.max(t.get(&[c, a + n, b]).abs());
                        }
                    }
                }
                Ok(worst)
            },
        ));

        let dhat = |what: &str, anchor: &str, kind: GenKind| {
            CheckReport::over_samples(id(what), anchor, tol, pts, |pt| {
                let dv = d.values(pt)?;
                let jet = jets.at(pt)?.structure(kind);
                Ok(max_norm(&match kind {
                    GenKind::GHat => dhat_metric(&dv, &jet),
                    _ => dhat_endo(&dv, &jet),
                }))
            })
        };
        let dhat_jm = dhat("dhat_jm", "D̂ J_m = 0", GenKind::Jm);
        let dhat_g = dhat("dhat_ghat", "D̂ ĝ = 0", GenKind::GHat);
        let dhat_jp = dhat("dhat_jp", "D̂ J_p = 0", GenKind::Jp);
        let dhat_jc = dhat("dhat_jc", "D̂ J_c = 0", GenKind::Jc);
        let dj_ok = CheckReport::over_samples("", "", tol, pts, |pt| Ok(nabla_j.at(pt)?.max_abs()));
        let dg = covariant_derivative_metric(d, &s.metric);
        let dg_ok = CheckReport::over_samples("", "", tol, pts, |pt| Ok(dg.at(pt)?.max_abs()));
        let mismatches = tracks(&dhat_jm, dj_ok.passed)
            + tracks(&dhat_g, dg_ok.passed)
            + tracks(&dhat_jp, dj_ok.passed && dg_ok.passed)
            + tracks(&dhat_jc, dj_ok.passed && dg_ok.passed);
        let summary = format!(
            "DJ {}, Dg {}; D̂J_m {}, D̂ĝ {}, D̂J_p {}, D̂J_c {}",
            verdict(&dj_ok),
            verdict(&dg_ok),
            verdict(&dhat_jm),
            verdict(&dhat_g),
            verdict(&dhat_jp),
            verdict(&dhat_jc)
        );
        out.extend([dhat_jm, dhat_g, dhat_jp, dhat_jc]);
        out.push(
            CheckReport::new(
                id("dhat_tracks"),
                "D̂J_m = 0 ⇔ DJ = 0; D̂ĝ = 0 ⇔ Dg = 0; D̂J_p = 0 and D̂J_c = 0 ⇔ DJ = 0 and Dg = 0",
                mismatches,
                0.5,
            )
            .with_note(summary),
        );
        out
    }

    fn integrability_checks(&self, gamma: &ConnectionField) -> Vec<CheckReport> {
        let s = self.s;
        let tol = self.tol();
        let pts = &self.samples;
        let mut out = Vec::new();
        let jets = match BaseJets::new(&s.j, &s.metric) {
            Ok(b) => b,
            Err(e) => return vec![CheckReport::failed_with("genconn.setup", "jets of J and g", tol, &e)],
        };
        let cond = ConditionContext::new(gamma, &s.j, &s.metric);
        for (kind, name, label) in [(GenKind::Jp, "jp", "J_p"), (GenKind::Jc, "jc", "J_c")] {
            let direct = CheckReport::over_samples(
                format!("genconn.{name}_integrable"),
                format!("N^∇_{{{label}}} = 0"),
                tol,
                pts,
                |pt| {
                    let jet = jets.at(pt)?.structure(kind);
                    Ok(gen_nijenhuis_basis(&gamma.values(pt)?, &jet).max_abs())
                },
            );
            let conds = CheckReport::over_samples(
                format!("genconn.{name}_conditions"),
                format!("the six conditions equivalent to N^∇_{{{label}}} = 0"),
                tol,
                pts,
                |pt| {
                    let l = cond.local(pt)?;
                    let v = if kind == GenKind::Jp { jp_conditions(&l) } else { jc_conditions(&l) };
                    Ok(v.iter().fold(0.0, |m, x| m.max(*x)))
                },
            );
            let agree = CheckReport::new(
                format!("genconn.{name}_equivalence"),
                format!("N^∇_{{{label}}} = 0 exactly when the six conditions hold"),
                tracks(&direct, conds.passed),
                0.5,
            )
            .with_note(format!("direct {}, conditions {}", verdict(&direct), verdict(&conds)));
            out.extend([direct, conds, agree]);
        }
        out
    }

    fn karaman(&self) -> Vec<CheckReport> {
        let s = self.s;
        let tol = self.tol();
        let pts = &self.samples;
        let n = s.dim();
        let anchor = "D = ∇ + F with F built from ω";
        let Some(omega) = &s.omega else {
            return vec![CheckReport::failed_with(
                "karaman.setup",
                anchor,
                tol,
                &Error::Validation(vec!["omega missing".into()]),
            )];
        };
        let k = match karaman_connection(&s.metric, &s.j, s.params, omega, pts) {
            Ok(k) => k,
            Err(e) => return vec![CheckReport::failed_with("karaman.setup", anchor, tol, &e)],
        };
        let d = &k.d;
        let dg = covariant_derivative_metric(d, &s.metric);
        let dj = covariant_derivative_endo(d, &s.j);
        let nabla_j = covariant_derivative_endo(&k.base, &s.j);
        let tor = torsion(d);
        let mut out = vec![
            CheckReport::over_samples("karaman.metric", "Dg = 0", tol, pts, |pt| Ok(dg.at(pt)?.max_abs())),
            CheckReport::over_samples("karaman.dj_matches_nabla_j", "DJ = ∇J", tol, pts, |pt| {
                Ok(dj.at(pt)?.max_abs_diff(&nabla_j.at(pt)?))
            }),
            CheckReport::over_samples(
                "karaman.torsion_formula",
                "T^D(X,Y) = ω(Y)X − ω(X)Y + (1/q)[ω(JY)JX − ω(JX)JY]",
                tol,
                pts,
                |pt| {
                    let t = tor.at(pt)?;
                    let jm = s.j.eval(pt)?;
                    let w = omega.eval(pt)?;
                    let mut worst = 0.0_f64;
                    for a in 0..n {
                        for b in 0..n {
                            let closed = torsion_formula_d(&jm, s.params, &w, &e_vec(n, a), &e_vec(n, b))?;
                            for (c, v) in closed.iter().enumerate() {
                                worst = worst.max((t.get(&[c, a, b]) - v).abs());
                            }
                        }
                    }
                    Ok(worst)
                },
            ),
            CheckReport::over_samples("karaman.torsion_j_linear", "T^D(JX,Y) = J T^D(X,Y) = T^D(X,JY)", tol, pts, |pt| {
                let t = tor.at(pt)?;
                let jm = s.j.eval(pt)?;
                Ok(torsion_j_linearity(&t, &jm))
            }),
            CheckReport::over_samples("karaman.phi_torsion", "Φ(T^D) = 0", tol, pts, |pt| {
                let t = tor.at(pt)?;
                let jm = s.j.eval(pt)?;
                let mut worst = 0.0_f64;
                for a in 0..n {
                    for b in 0..n {
                        let v = phi_of_tensor(&t, &jm, &e_vec(n, a), &e_vec(n, b));
                        worst = v.iter().fold(worst, |m, x| m.max(x.abs()));
                    }
                }
                Ok(worst)
            }),
        ];
        let jets = BaseJets::new(&s.j, &s.metric);
        out.push(match &jets {
            Ok(jets) => CheckReport::over_samples("karaman.gen_nijenhuis_jm", "N^D_{J_m} = 0", tol, pts, |pt| {
                let jet = jets.at(pt)?.structure(GenKind::Jm);
                Ok(gen_nijenhuis_basis(&d.values(pt)?, &jet).max_abs())
            }),
            Err(e) => CheckReport::failed_with("karaman.gen_nijenhuis_jm", "N^D_{J_m} = 0", tol, e),
        });
        out.extend(self.connection_checks("karaman", d));
        out
    }

    fn lift(&mut self, flavor: Flavor) -> std::result::Result<&Lift, Error> {
        if !self.lifts.iter().any(|(f, _)| *f == flavor) {
            let built = match &self.gamma {
                Ok(g) => lift_structure(flavor, &self.s.metric, &self.s.j, g),
                Err(e) => Err(e.clone()),
            };
            self.lifts.push((flavor, built));
        }
        let (_, r) = self.lifts.iter().find(|(f, _)| *f == flavor).expect("inserted above");
        r.as_ref().map_err(Clone::clone)
    }

    fn lifted_points(&self) -> Vec<Vec<f64>> {
        lifted_samples(&self.samples, &vec![FIBRE_BOX; self.s.dim()], self.s.seed())
    }

    fn lifts(&mut self, flavor: Flavor) -> Vec<CheckReport> {
        let tol = self.tol();
        let params = self.s.params;
        let pts = self.lifted_points();
        let lift = match self.lift(flavor) {
            Ok(l) => l.clone(),
            Err(e) => {
                return vec![CheckReport::failed_with(
                    format!("lifts.{}.setup", flavor.label()),
                    "lifted structure by conjugation",
                    tol,
                    &e,
                )]
            }
        };
        let mut out = check_lifted_structure(&lift, params, &pts, tol);
        out.extend(check_frame_displays(&lift, &pts, tol));
        out.extend(lifted_metric_components(&lift, &pts, tol));
        match lifted_nijenhuis(&lift, params, &pts, tol) {
            Ok(cmp) => {
                out.extend(cmp.checks);
                self.conventions.push(ConventionRecord {
                    flavor,
                    resolution: cmp.resolution,
                    residuals: cmp.conventions,
                });
            }
            Err(e) => out.push(CheckReport::failed_with(
                format!("lifts.{}.nijenhuis", flavor.label()),
                "lifted Nijenhuis tensor",
                tol,
                &e,
            )),
        }
        out
    }

    fn commutation(&mut self) -> Vec<CheckReport> {
        let tol = self.tol();
        let anchor = "J̄ ∘ (Ψ ∘ Φ⁻¹) = (Ψ ∘ Φ⁻¹) ∘ J̃";
        let pts = self.lifted_points();
        let t = self.lift(Flavor::Tangent).cloned();
        let c = self.lift(Flavor::Cotangent).cloned();
        vec![match (t, c) {
            (Ok(t), Ok(c)) => commutation_check(&t, &c, &pts, tol),
            (Err(e), _) | (_, Err(e)) => CheckReport::failed_with("commutation", anchor, tol, &e),
        }]
    }
}

fn verdict(r: &CheckReport) -> &'static str {
    if r.passed {
        "pass"
    } else {
        "fail"
    }
}

/// `max(‖T(JX,Y) − J T(X,Y)‖, ‖T(X,JY) − J T(X,Y)‖)` over basis pairs.
fn torsion_j_linearity(t: &Tensor, jm: &DMatrix<f64>) -> f64 {
    let n = t.dim();
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut jt = 0.0;
                let mut tjx = 0.0;
                let mut tjy = 0.0;
                for s in 0..n {
                    jt += jm[(c, s)] * t.get(&[s, a, b]);
                    tjx += t.get(&[c, s, b]) * jm[(s, a)];
                    tjy += t.get(&[c, a, s]) * jm[(s, b)];
                }
                worst = worst.max((tjx - jt).abs()).max((tjy - jt).abs());
            }
        }
    }
    worst
}
