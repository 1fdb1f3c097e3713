//! Rubin's rules with the classical and the small-sample degrees of freedom.

use crtmi::pooling::{barnard_rubin_pool, rubin_pool, t_quantile_975};

fn main() -> crtmi::Result<()> {
    let p = rubin_pool(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0])?;
    println!("q_bar {} W {} B {} T {} df {}", p.q_bar, p.w, p.b, p.t, p.df);
    println!("95% CI [{:.4}, {:.4}] with t quantile {:.4}", p.ci.0, p.ci.1, t_quantile_975(p.df));

    let est = [0.98, 1.05, 1.11, 0.93, 1.02];
    let var = [0.020, 0.022, 0.019, 0.021, 0.020];
    let classical = rubin_pool(&est, &var)?;
    let small = barnard_rubin_pool(&est, &var, 8.0)?;
    println!("classical df {:.1}, CI [{:.3}, {:.3}]", classical.df, classical.ci.0, classical.ci.1);
    println!("complete-data df 8: df {:.2}, CI [{:.3}, {:.3}]", small.df, small.ci.0, small.ci.1);
    Ok(())
}
