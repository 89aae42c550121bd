//! CSV data behind each standard plot.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use margin_vote::chain::{self, DEFAULT_MAX_STEPS, DEFAULT_TAIL_TOL};
use margin_vote::closed_form;
use margin_vote::comparison::{self, DominanceRow};
use margin_vote::montecarlo::{self, SweepRow};
use margin_vote::planning;
use margin_vote::{accuracy_from_odds, OddsRatio, VotingSpec};

use crate::args::{parse_grid, parse_int_list, Destination, Format, Grid, IntList};
use crate::commands::{flagged, pdf_rows, table_artifact, Artifact, Output};
use crate::table::{round_sig, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
pub enum FigureId {
    /// Quality against accuracy for several thresholds.
    #[value(name = "Q_of_p")]
    #[serde(rename = "Q_of_p")]
    QOfP,
    /// Expected votes against accuracy.
    #[value(name = "ET_d", alias = "ET(d)")]
    #[serde(rename = "ET_d")]
    EtD,
    /// Vote-count variance against accuracy.
    #[value(name = "Var_by_d")]
    #[serde(rename = "Var_by_d")]
    VarByD,
    /// Expected votes with two-standard-deviation bands.
    #[value(name = "ET_with_std")]
    #[serde(rename = "ET_with_std")]
    EtWithStd,
    /// Time-to-consensus distribution at δ = 4 for φ ∈ {1.5, 2, 3}.
    #[value(name = "pdf_Tk")]
    #[serde(rename = "pdf_Tk")]
    PdfTk,
    /// Simulated against theoretical quality.
    #[value(name = "q_sim", alias = "q_th_vs_q_sim")]
    #[serde(rename = "q_sim")]
    QSim,
    /// Simulated against theoretical expected votes.
    #[value(name = "ET_sim", alias = "ET_th_vs_ET_sim")]
    #[serde(rename = "ET_sim")]
    EtSim,
    /// Simulated against theoretical variance.
    #[value(name = "var_sim", alias = "var_th_vs_randomwalk")]
    #[serde(rename = "var_sim")]
    VarSim,
    /// Effort along iso-payment curves.
    #[value(name = "iso_payment_effort", alias = "iso-payment-effort")]
    #[serde(rename = "iso_payment_effort")]
    IsoPaymentEffort,
    /// Risk-averse pool-2 payments for λ ∈ {1, 2, 10}.
    #[value(name = "utile_payments")]
    #[serde(rename = "utile_payments")]
    UtilePayments,
    /// Margin quality against majority voting.
    #[value(name = "Q_MV")]
    #[serde(rename = "Q_MV")]
    QMv,
    /// Expected-cost ratio against early-stopping majority voting.
    #[value(name = "MV_cost_ratio")]
    #[serde(rename = "MV_cost_ratio")]
    MvCostRatio,
    /// Every figure above.
    #[value(name = "all")]
    #[serde(rename = "all")]
    All,
}

impl FigureId {
    pub const EACH: [FigureId; 12] = [
        FigureId::QOfP,
        FigureId::EtD,
        FigureId::VarByD,
        FigureId::EtWithStd,
        FigureId::PdfTk,
        FigureId::QSim,
        FigureId::EtSim,
        FigureId::VarSim,
        FigureId::IsoPaymentEffort,
        FigureId::UtilePayments,
        FigureId::QMv,
        FigureId::MvCostRatio,
    ];

    pub fn file_stem(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FiguresArgs {
    /// Figures to produce; repeat the flag for several.
    #[arg(long, value_enum, default_value = "all")]
    pub id: Vec<FigureId>,
    /// Walks per grid cell for the simulation figures.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_parser = parse_grid, default_value = "0.51:0.99:0.02")]
    pub p_grid: Grid,
    #[arg(long, value_parser = parse_int_list, default_value = "2:5")]
    pub deltas: IntList,
    #[command(flatten)]
    #[serde(skip)]
    pub dest: Destination,
}

struct Context<'a> {
    args: &'a FiguresArgs,
    sweep: Option<Vec<SweepRow>>,
    scan: Option<Vec<DominanceRow>>,
}

impl Context<'_> {
    fn sweep(&mut self) -> anyhow::Result<&[SweepRow]> {
        if self.sweep.is_none() {
            let a = self.args;
            let rows = flagged(montecarlo::error_sweep(&a.p_grid.0, &a.deltas.0, a.trials, a.seed), "--trials")?;
            self.sweep = Some(rows);
        }
        Ok(self.sweep.as_deref().expect("just filled"))
    }

    fn scan(&mut self) -> anyhow::Result<&[DominanceRow]> {
        if self.scan.is_none() {
            let a = self.args;
            let rows = flagged(
                comparison::dominance_scan(&a.p_grid.0, &a.deltas.0, |d| 2 * d - 1, true),
                "--p-grid",
            )?;
            self.scan = Some(rows);
        }
        Ok(self.scan.as_deref().expect("just filled"))
    }
}

fn closed_stats(p: f64, delta: u32) -> anyhow::Result<margin_vote::ConsensusStats> {
    let spec = flagged(VotingSpec::new(p, delta as f64), "--p-grid")?;
    Ok(closed_form::stats(&spec)?)
}

fn steps(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round_sig(start + i as f64 * step)).collect()
}

fn figure(id: FigureId, ctx: &mut Context) -> anyhow::Result<Table> {
    let args = ctx.args;
    let deltas = &args.deltas.0;
    let grid = &args.p_grid.0;
    let table = match id {
        FigureId::QOfP => {
            let mut t = Table::new(&["p", "delta", "quality"]);
            for &d in deltas {
                for p in steps(0.5, 1.0, 0.01) {
                    let spec = VotingSpec::new(p, d as f64)?;
                    t.push(vec![p.into(), d.into(), closed_form::consensus_quality(&spec).into()]);
                }
            }
            t
        }
        FigureId::EtD => {
            let mut t = Table::new(&["p", "delta", "expected_votes"]);
            for &d in deltas {
                for &p in grid {
                    t.push(vec![p.into(), d.into(), closed_stats(p, d)?.expected_votes.into()]);
                }
            }
            t
        }
        FigureId::VarByD => {
            let mut t = Table::new(&["p", "delta", "votes_variance", "std_dev"]);
            for &d in deltas {
                for &p in grid {
                    let s = closed_stats(p, d)?;
                    t.push(vec![p.into(), d.into(), s.votes_variance.into(), s.std_dev().into()]);
                }
            }
            t
        }
        FigureId::EtWithStd => {
            let mut t = Table::new(&["p", "delta", "expected_votes", "votes_variance", "lower", "upper"]);
            for &d in deltas {
                for &p in grid {
                    let s = closed_stats(p, d)?;
                    // bands from the printed values so they can be recomputed from the file
                    let (e, v) = (round_sig(s.expected_votes), round_sig(s.votes_variance));
                    let half = 2.0 * v.sqrt();
                    t.push(vec![p.into(), d.into(), e.into(), v.into(), (e - half).into(), (e + half).into()]);
                }
            }
            t
        }
        FigureId::PdfTk => {
            let mut t = Table::new(&["phi", "p", "m", "f_incorrect", "f_correct", "cdf"]);
            for phi in [1.5, 2.0, 3.0] {
                let spec = VotingSpec::from_odds(OddsRatio::new(phi)?, 4.0)?;
                let model = chain::build_chain(&spec)?;
                let dist = chain::termination_distribution(&model, DEFAULT_TAIL_TOL, DEFAULT_MAX_STEPS)?;
                for (m, fi, fc, cdf) in pdf_rows(&dist) {
                    t.push(vec![phi.into(), spec.p().into(), m.into(), fi.into(), fc.into(), cdf.into()]);
                }
            }
            t
        }
        FigureId::QSim => {
            let mut t = Table::new(&["p", "delta", "trials", "quality_theory", "quality_sim", "err_quality"]);
            for r in ctx.sweep()? {
                t.push(vec![
                    r.p.into(),
                    r.delta.into(),
                    r.trials.into(),
                    r.quality_theory.into(),
                    r.quality_sim.into(),
                    r.err_quality.into(),
                ]);
            }
            t
        }
        FigureId::EtSim => {
            let mut t = Table::new(&[
                "p",
                "delta",
                "trials",
                "expected_votes_theory",
                "mean_votes_sim",
                "err_expected_votes",
            ]);
            for r in ctx.sweep()? {
                t.push(vec![
                    r.p.into(),
                    r.delta.into(),
                    r.trials.into(),
                    r.expected_votes_theory.into(),
                    r.mean_votes_sim.into(),
                    r.err_expected_votes.into(),
                ]);
            }
            t
        }
        FigureId::VarSim => {
            let mut t = Table::new(&["p", "delta", "trials", "variance_theory", "variance_sim", "err_variance"]);
            for r in ctx.sweep()? {
                t.push(vec![
                    r.p.into(),
                    r.delta.into(),
                    r.trials.into(),
                    r.variance_theory.into(),
                    r.variance_sim.into(),
                    r.err_variance.into(),
                ]);
            }
            t
        }
        FigureId::IsoPaymentEffort => {
            let mut t = Table::new(&["phi", "p", "c", "effort"]);
            for c in [0.5, 1.0, 2.0] {
                for phi in steps(1.05, 20.0, 0.05) {
                    let p = accuracy_from_odds(OddsRatio::new(phi)?).value();
                    t.push(vec![phi.into(), p.into(), c.into(), planning::iso_effort(phi, c)?.into()]);
                }
            }
            t
        }
        FigureId::UtilePayments => {
            let (phi1, delta1, pay1) = (9.0, 2u32, 1.0);
            let mut t = Table::new(&[
                "phi1",
                "delta1",
                "p2",
                "phi2",
                "delta2_real",
                "delta2",
                "lambda",
                "pay2",
                "pay2_risk_neutral",
            ]);
            for lambda in [1.0, 2.0, 10.0] {
                for p2 in steps(0.55, 0.95, 0.01) {
                    let phi2 = p2 / (1.0 - p2);
                    let real = planning::equivalent_threshold(phi1, delta1 as f64, phi2)?;
                    let d2 = planning::integerize_threshold(real, phi2)?.ceil;
                    let plan = planning::utility_pay_ratio_at(phi1, delta1, pay1, phi2, d2, lambda)?;
                    let neutral = planning::utility_pay_ratio_at(phi1, delta1, pay1, phi2, d2, 0.0)?;
                    t.push(vec![
                        phi1.into(),
                        delta1.into(),
                        p2.into(),
                        phi2.into(),
                        real.into(),
                        d2.into(),
                        lambda.into(),
                        plan.pay2.into(),
                        neutral.pay2.into(),
                    ]);
                }
            }
            t
        }
        FigureId::QMv => {
            let mut t = Table::new(&["p", "delta", "n", "quality_margin", "quality_mv", "quality_mv_matched"]);
            for r in ctx.scan()? {
                t.push(vec![
                    r.p.into(),
                    r.delta.into(),
                    r.n.into(),
                    r.quality_margin.into(),
                    r.quality_mv.into(),
                    r.quality_mv_matched.into(),
                ]);
            }
            t
        }
        FigureId::MvCostRatio => {
            let mut t = Table::new(&["p", "delta", "n", "expected_votes_margin", "expected_votes_mv", "ratio"]);
            for r in ctx.scan()? {
                t.push(vec![
                    r.p.into(),
                    r.delta.into(),
                    r.n.into(),
                    r.expected_votes_margin.into(),
                    r.expected_votes_mv.into(),
                    r.ratio.into(),
                ]);
            }
            t
        }
        FigureId::All => unreachable!("expanded before dispatch"),
    };
    Ok(table)
}

impl FiguresArgs {
    /// Requested figures in canonical order, without duplicates.
    pub fn selected(&self) -> Vec<FigureId> {
        if self.id.contains(&FigureId::All) {
            return FigureId::EACH.to_vec();
        }
        FigureId::EACH.into_iter().filter(|f| self.id.contains(f)).collect()
    }

    pub fn run(&self) -> anyhow::Result<Output> {
        let mut ctx = Context {
            args: self,
            sweep: None,
            scan: None,
        };
        let artifacts = self
            .selected()
            .into_iter()
            .map(|id| {
                let t = figure(id, &mut ctx)?;
                table_artifact(&id.file_stem(), &t, Format::Csv)
            })
            .collect::<anyhow::Result<Vec<Artifact>>>()?;
        Ok(Output {
            artifacts,
            directory: true,
        })
    }
}
