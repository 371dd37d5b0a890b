use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Residual rows whose squared norm is at or below this are treated as zero.
pub(crate) const RESIDUAL_FLOOR: f64 = 1e-14;

/// Moves local residuals into the residual space of the global model while
/// keeping each row's squared norm.
///
/// `local` holds the residuals of the validation rows under the local model
/// and `projected` the same rows after the global residual projector; each
/// projected row is rescaled to the squared norm of its local counterpart.
/// `rows` are the source row indices, used only for error reporting.
pub(crate) fn restore(
    local: &DMatrix<f64>,
    projected: DMatrix<f64>,
    segment: usize,
    rows: &[usize],
) -> Result<DMatrix<f64>> {
    let mut out = projected;
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let target = local.row(i).norm_squared();
        let got = row.norm_squared();
        if got <= RESIDUAL_FLOOR {
            if target > RESIDUAL_FLOOR {
                return Err(Error::DegenerateResidual {
                    segment: segment + 1,
                    row: rows[i],
                });
            }
            row.fill(0.0);
        } else {
            row *= (target / got).sqrt();
        }
    }
    Ok(out)
}
