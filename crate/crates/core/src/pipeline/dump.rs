//! CSV dumps of the ambient fields for external plotting.

use nalgebra::DVector;

use crate::canonical::format_float;
use crate::error::Error;
use crate::geometry::curvature::riemann_curvature;
use crate::geometry::mtw::{mtw_sectional, rotation_set, KappaOptions, MtwOptions, PairFrame};
use crate::geometry::Geometry;

/// Label of the cross-curvature rows; `i` is the rotation and `j` the pair within it.
pub const MTW_LABEL: &str = "mtw";

fn csv_error(path: &str, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Null pairs `(xi, xibar)` grouped by rotation.
pub type PairSets = Vec<Vec<(DVector<f64>, DVector<f64>)>>;

/// Null pairs used for the dumped cross-curvature samples at `(x, xbar)`.
pub fn dump_pairs(geo: &Geometry, x: &[f64], xbar: &[f64]) -> Result<PairSets, Error> {
    let k = KappaOptions::default();
    let frame = PairFrame::at(&geo.model, &geo.dens, x, xbar)?;
    Ok(rotation_set(geo.dim(), k.rotations, k.seed).iter().map(|q| frame.pairs(q)).collect())
}

/// `g_hat` and `S_hat` components and cross-curvature samples at the cell
/// midpoints of a `grid^{2n}` product grid. Returns the number of data rows.
pub fn dump_fields(geo: &Geometry, grid: usize, path: &str) -> Result<usize, Error> {
    let n = geo.dim();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    header.extend((1..=n).map(|k| format!("xbar{k}")));
    header.extend(["label", "i", "j", "value"].map(String::from));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let opts = MtwOptions { stencil_h: geo.ambient.stencil_h, ..Default::default() };
    let mut rows = 0;
    for p in geo.model.domain_x.product(&geo.model.domain_xbar).midpoint_grid(grid) {
        let coords: Vec<String> = p.iter().map(|v| format_float(*v)).collect();
        let mut emit = |label: &str, i: usize, j: usize, value: f64| -> Result<(), Error> {
            let mut rec = coords.clone();
            rec.extend([label.to_string(), i.to_string(), j.to_string(), format_float(value)]);
            rows += 1;
            w.write_record(&rec).map_err(|e| csv_error(path, e))
        };
        for field in [&geo.ambient.g_hat, &geo.ambient.s_hat] {
            let m = field.eval(&p)?;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    emit(field.label.name(), i, j, m[(i, j)])?;
                }
            }
        }
        let (x, xbar) = p.split_at(n);
        for (r, pairs) in dump_pairs(geo, x, xbar)?.iter().enumerate() {
            for (k, (xi, xb)) in pairs.iter().enumerate() {
                let v = mtw_sectional(&geo.model, &geo.dens, x, xbar, xi.as_slice(), xb.as_slice(), &opts)?;
                emit(MTW_LABEL, r, k, v)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// All `(2n)^4` components of the curvature of `g_hat` at `p`.
pub fn dump_riemann(geo: &Geometry, p: &[f64], path: &str) -> Result<usize, Error> {
    let sample = riemann_curvature(&geo.ambient.g_hat, p, geo.ambient.stencil_h)?;
    let d = sample.dim();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["alpha", "beta", "gamma", "delta", "value"]).map_err(|e| csv_error(path, e))?;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let v = format_float(sample.riemann.get(a, b, c, e));
                    w.write_record([a.to_string(), b.to_string(), c.to_string(), e.to_string(), v])
                        .map_err(|e| csv_error(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(d.pow(4))
}
