//! Deterministic reference checks: structured vs dense likelihood, the
//! Rubin hand case, the 2x2 ANOVA, calibration against quadrature and the
//! MMI sampler recovery/stationarity checks.

use crtmi::bench::oracles;

fn main() -> crtmi::Result<()> {
    println!("loglik max |structured - dense| over 100 instances: {:.3e}", oracles::structured_vs_dense_max_diff(100, 7));
    let [q, t, df] = oracles::rubin_hand_case_errors()?;
    println!("rubin hand case errors: q_bar {q:e}, T {t:e}, df {df:e}");
    println!("2x2 anova max relative error: {:.3e}", oracles::anova_2x2_max_rel_err()?);
    let [e0, e1] = oracles::calibration_errors()?;
    println!("calibration errors: eta=0 {e0:.3e}, eta=1 {e1:.3e}");
    println!("eta=1, target 0.2: alpha0 by quadrature {:.6}", oracles::simpson_alpha0(1.0, 0.2));
    println!("mmi recovery max relative error: {:.4}", oracles::mmi_recovery_max_rel_err(11, 20, 200, 500)?);
    println!("mmi stationarity max z: {:.4}", oracles::mmi_stationarity_max_z(13, 2000)?);
    Ok(())
}
