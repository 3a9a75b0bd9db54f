use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Mat, PivotedQr};

/// Residualizes y, A and Z on the controls. The result carries only a
/// constant control column but remembers how many columns were absorbed, so
/// degrees-of-freedom corrections stay correct downstream.
pub fn partial_out(data: &Dataset) -> Result<Dataset> {
    let x = data.x();
    let qr = PivotedQr::new(x);
    if !qr.is_full_rank() {
        return Err(Error::RankDeficientControls {
            column: qr.first_deficient_column().unwrap_or(0),
            condition: qr.condition_number(),
        });
    }
    let (n, k, m) = (data.n(), data.k(), data.n_instruments());
    let mut stacked = Mat::zeros(n, 1 + k + m);
    stacked.set_column(0, data.y());
    stacked.columns_mut(1, k).copy_from(data.a());
    stacked.columns_mut(1 + k, m).copy_from(data.z());
    let res = qr.residuals(&stacked).expect("full-rank controls");
    Ok(Dataset::partialled(
        res.column(0).into_owned(),
        res.columns(1, k).into_owned(),
        res.columns(1 + k, m).into_owned(),
        data.cluster().to_vec(),
        data.group().map(|g| g.to_vec()),
        data.n_controls(),
    ))
}
