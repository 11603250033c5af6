//! File formats: spline models, scalar grids (binary raster or CSV), and
//! critical-point lists. All text reals carry 17 significant digits so a
//! write/read/write cycle is byte-identical.

use crate::error::{Error, Result};
use crate::extract::{CriticalPoint, MorseType};
use crate::field::GridScalarField;
use crate::pl::PlCriticalPoint;
use crate::spline::{KnotVector, TensorSplineModel};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

const MODEL_MAGIC: &str = "spline-model";
const GRID_MAGIC: &str = "scalar-grid";
const CP_MAGIC: &str = "critical-points";

/// 17-significant-digit rendering, enough to round-trip any finite f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// model files

pub fn model_to_string(model: &TensorSplineModel) -> String {
    let d = model.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_MAGIC} 1");
    let _ = writeln!(s, "dim {d}");
    let degrees: Vec<String> = (0..d).map(|l| model.degree(l).to_string()).collect();
    let _ = writeln!(s, "degrees {}", degrees.join(" "));
    for &(lo, hi) in model.extents() {
        let _ = writeln!(s, "extent {} {}", fmt_f64(lo), fmt_f64(hi));
    }
    for l in 0..d {
        let kv = model.knot_vector(l);
        let vals: Vec<String> = kv.knots().iter().map(|&t| fmt_f64(t)).collect();
        let _ = writeln!(s, "knots {} {}", kv.knots().len(), vals.join(" "));
    }
    let dims: Vec<String> = model.control_dims().iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "controls {}", dims.join(" "));
    for chunk in model.controls().chunks(4) {
        let vals: Vec<String> = chunk.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s
}

pub fn write_model(model: &TensorSplineModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

/// Short content hash of a model's canonical serialization.
pub fn model_hash(model: &TensorSplineModel) -> String {
    let digest = Sha256::digest(model_to_string(model).as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn model_from_str(text: &str, origin: &str) -> Result<TensorSplineModel> {
    let mut tokens = text.split_whitespace();
    let mut next = || {
        tokens
            .next()
            .ok_or_else(|| Error::format(origin, "unexpected end of file"))
    };
    let expect = |tok: &str, what: &str| -> Result<()> {
        if tok != what {
            return Err(Error::format(origin, format!("expected `{what}`, got `{tok}`")));
        }
        Ok(())
    };

    expect(next()?, MODEL_MAGIC)?;
    expect(next()?, "1")?;
    expect(next()?, "dim")?;
    let d: usize = parse(next()?, origin)?;
    if d == 0 {
        return Err(Error::format(origin, "dim must be positive"));
    }
    expect(next()?, "degrees")?;
    let mut degrees = Vec::with_capacity(d);
    for _ in 0..d {
        degrees.push(parse::<usize>(next()?, origin)?);
    }
    let mut extents = Vec::with_capacity(d);
    for _ in 0..d {
        expect(next()?, "extent")?;
        let lo: f64 = parse(next()?, origin)?;
        let hi: f64 = parse(next()?, origin)?;
        extents.push((lo, hi));
    }
    let mut knots = Vec::with_capacity(d);
    for &p in &degrees {
        expect(next()?, "knots")?;
        let count: usize = parse(next()?, origin)?;
        let mut vals = Vec::with_capacity(count);
        for _ in 0..count {
            vals.push(parse::<f64>(next()?, origin)?);
        }
        knots.push(KnotVector::new(p, vals)?);
    }
    expect(next()?, "controls")?;
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        dims.push(parse::<usize>(next()?, origin)?);
    }
    let count: usize = dims.iter().product();
    let mut controls = Vec::with_capacity(count);
    for _ in 0..count {
        controls.push(parse::<f64>(next()?, origin)?);
    }
    if tokens.next().is_some() {
        return Err(Error::format(origin, "trailing data after control lattice"));
    }
    for (l, kv) in knots.iter().enumerate() {
        if kv.control_count() != dims[l] {
            return Err(Error::format(
                origin,
                format!(
                    "axis {l}: knot vector supports {} controls, lattice has {}",
                    kv.control_count(),
                    dims[l]
                ),
            ));
        }
    }
    TensorSplineModel::new(knots, controls, extents)
}

pub fn read_model(path: &Path) -> Result<TensorSplineModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text, &path.display().to_string())
}

fn parse<T: std::str::FromStr>(tok: &str, origin: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::format(origin, format!("cannot parse `{tok}`")))
}

// ---------------------------------------------------------------------------
// grid files: text header, little-endian f64 raster

pub fn write_grid(field: &GridScalarField, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let mut header = String::new();
    let _ = writeln!(header, "{GRID_MAGIC} 1");
    let _ = writeln!(header, "dim {}", field.dim());
    let counts: Vec<String> = field.dims().iter().map(|m| m.to_string()).collect();
    let _ = writeln!(header, "counts {}", counts.join(" "));
    for &(lo, hi) in field.extents() {
        let _ = writeln!(header, "extent {} {}", fmt_f64(lo), fmt_f64(hi));
    }
    let _ = writeln!(header, "values le-f64");
    file.write_all(header.as_bytes())?;
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for &v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

fn read_grid_bytes(bytes: &[u8], origin: &str) -> Result<GridScalarField> {
    // the header is newline-terminated ASCII ending with the encoding tag
    let tag = b"values le-f64\n";
    let split = bytes
        .windows(tag.len())
        .position(|w| w == tag)
        .ok_or_else(|| Error::format(origin, "missing `values le-f64` header line"))?
        + tag.len();
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::format(origin, "header is not valid UTF-8"))?;
    let mut tokens = header.split_whitespace();
    let mut next = || {
        tokens
            .next()
            .ok_or_else(|| Error::format(origin, "unexpected end of header"))
    };
    let expect = |tok: &str, what: &str| -> Result<()> {
        if tok != what {
            return Err(Error::format(origin, format!("expected `{what}`, got `{tok}`")));
        }
        Ok(())
    };
    expect(next()?, GRID_MAGIC)?;
    expect(next()?, "1")?;
    expect(next()?, "dim")?;
    let d: usize = parse(next()?, origin)?;
    expect(next()?, "counts")?;
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        dims.push(parse::<usize>(next()?, origin)?);
    }
    let mut extents = Vec::with_capacity(d);
    for _ in 0..d {
        expect(next()?, "extent")?;
        let lo: f64 = parse(next()?, origin)?;
        let hi: f64 = parse(next()?, origin)?;
        extents.push((lo, hi));
    }
    expect(next()?, "values")?;
    expect(next()?, "le-f64")?;

    let count: usize = dims.iter().product();
    let raster = &bytes[split..];
    if raster.len() != count * 8 {
        return Err(Error::format(
            origin,
            format!("raster holds {} bytes, expected {}", raster.len(), count * 8),
        ));
    }
    let values: Vec<f64> = raster
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridScalarField::new(dims, extents, values)
}

/// Read a field from either the binary grid format or, for 1-D and 2-D data,
/// a plain CSV with header `x,value` or `x,y,value`.
pub fn read_field(path: &Path) -> Result<GridScalarField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let origin = path.display().to_string();
    if bytes.starts_with(GRID_MAGIC.as_bytes()) {
        return read_grid_bytes(&bytes, &origin);
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::format(&origin, "neither a grid file nor UTF-8 CSV"))?;
    read_csv_str(text, &origin)
}

/// CSV writer for 1-D and 2-D fields. Rows iterate the last axis fastest, in
/// the same order as the stored raster.
pub fn write_csv(field: &GridScalarField, path: &Path) -> Result<()> {
    let d = field.dim();
    if d > 2 {
        return Err(Error::InvalidField(format!(
            "CSV output supports 1-D and 2-D fields, got {d}-D"
        )));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{}", if d == 1 { "x,value" } else { "x,y,value" });
    let dims = field.dims();
    if d == 1 {
        for i in 0..dims[0] {
            let _ = writeln!(
                s,
                "{},{}",
                fmt_f64(field.physical_coord(0, i)),
                fmt_f64(field.value(&[i]))
            );
        }
    } else {
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f64(field.physical_coord(0, i)),
                    fmt_f64(field.physical_coord(1, j)),
                    fmt_f64(field.value(&[i, j]))
                );
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn read_csv_str(text: &str, origin: &str) -> Result<GridScalarField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::format(origin, "empty CSV"))?;
    let d = match header.trim() {
        "x,value" => 1,
        "x,y,value" => 2,
        other => {
            return Err(Error::format(
                origin,
                format!("unrecognized CSV header `{other}`"),
            ))
        }
    };
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::format(
                origin,
                format!("row {}: expected {} columns", lineno + 2, d + 1),
            ));
        }
        let coords: Vec<f64> = fields[..d]
            .iter()
            .map(|t| parse::<f64>(t, origin))
            .collect::<Result<_>>()?;
        rows.push((coords, parse(fields[d], origin)?));
    }
    // reconstruct the grid from the coordinate products
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (coords, _) in &rows {
        for l in 0..d {
            if !axes[l].contains(&coords[l]) {
                axes[l].push(coords[l]);
            }
        }
    }
    for axis in &mut axes {
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let count: usize = dims.iter().product();
    if rows.len() != count {
        return Err(Error::format(
            origin,
            format!("{} rows do not tile a {:?} grid", rows.len(), dims),
        ));
    }
    let extents: Vec<(f64, f64)> = axes
        .iter()
        .map(|a| (*a.first().unwrap(), *a.last().unwrap()))
        .collect();
    let mut values = vec![f64::NAN; count];
    let strides = crate::lattice::strides(&dims);
    for (coords, v) in rows {
        let mut flat = 0;
        for l in 0..d {
            let i = axes[l].iter().position(|&c| c == coords[l]).unwrap();
            flat += i * strides[l];
        }
        values[flat] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::format(origin, "duplicate or missing grid rows"));
    }
    GridScalarField::new(dims, extents, values)
}

// ---------------------------------------------------------------------------
// critical-point files

/// Header block of a critical-point file.
#[derive(Debug, Clone)]
pub struct CpHeader {
    /// `cpe` for Newton extraction, `pl` for the piecewise-linear reference.
    pub method: String,
    pub dim: usize,
    pub model_hash: String,
    pub extents: Vec<(f64, f64)>,
    /// Physical grid cell sizes, when the producing run knows them.
    pub cells: Option<Vec<f64>>,
    /// Echo of the effective configuration, for reproduction.
    pub config: Vec<(String, String)>,
}

/// One record: `physical.. param.. value grad_norm det_h lambda type`.
#[derive(Debug, Clone)]
pub struct CpRecord {
    pub physical: Vec<f64>,
    pub param: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub det_hessian: f64,
    pub lambda: usize,
    pub morse_type: MorseType,
}

impl CpRecord {
    pub fn from_critical_point(p: &CriticalPoint) -> CpRecord {
        CpRecord {
            physical: p.physical.clone(),
            param: p.location.clone(),
            value: p.value,
            grad_norm: p.grad_norm,
            det_hessian: p.det_hessian,
            lambda: p.lambda,
            morse_type: p.morse_type,
        }
    }

    /// PL records carry no gradient or Hessian; those columns hold NaN.
    pub fn from_pl_point(p: &PlCriticalPoint, dim: usize) -> CpRecord {
        let lambda = match p.morse_type {
            MorseType::Minimum => 0,
            MorseType::Saddle(k) => k,
            MorseType::Maximum => dim,
        };
        CpRecord {
            physical: p.physical.clone(),
            param: p.location.clone(),
            value: p.value,
            grad_norm: f64::NAN,
            det_hessian: f64::NAN,
            lambda,
            morse_type: p.morse_type,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CpFile {
    pub header: CpHeader,
    pub records: Vec<CpRecord>,
}

pub fn cpoints_to_string(header: &CpHeader, records: &[CpRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CP_MAGIC} 1");
    let _ = writeln!(s, "# method {}", header.method);
    let _ = writeln!(s, "# dim {}", header.dim);
    let _ = writeln!(s, "# model {}", header.model_hash);
    let _ = writeln!(s, "# count {}", records.len());
    let ext: Vec<String> = header
        .extents
        .iter()
        .flat_map(|&(lo, hi)| [fmt_f64(lo), fmt_f64(hi)])
        .collect();
    let _ = writeln!(s, "# extents {}", ext.join(" "));
    if let Some(cells) = &header.cells {
        let c: Vec<String> = cells.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(s, "# cells {}", c.join(" "));
    }
    let cfg: Vec<String> = header
        .config
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(s, "# config {}", cfg.join(" "));
    let _ = writeln!(
        s,
        "# columns phys[{d}] param[{d}] value grad_norm det_h lambda type",
        d = header.dim
    );
    for r in records {
        let mut cols: Vec<String> = Vec::with_capacity(2 * header.dim + 5);
        cols.extend(r.physical.iter().map(|&v| fmt_f64(v)));
        cols.extend(r.param.iter().map(|&v| fmt_f64(v)));
        cols.push(fmt_f64(r.value));
        cols.push(fmt_f64(r.grad_norm));
        cols.push(fmt_f64(r.det_hessian));
        cols.push(r.lambda.to_string());
        cols.push(r.morse_type.label());
        let _ = writeln!(s, "{}", cols.join(" "));
    }
    s
}

pub fn write_cpoints(header: &CpHeader, records: &[CpRecord], path: &Path) -> Result<()> {
    std::fs::write(path, cpoints_to_string(header, records))?;
    Ok(())
}

pub fn read_cpoints(path: &Path) -> Result<CpFile> {
    let text = std::fs::read_to_string(path)?;
    cpoints_from_str(&text, &path.display().to_string())
}

pub fn cpoints_from_str(text: &str, origin: &str) -> Result<CpFile> {
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::format(origin, "empty file"))?;
    if magic.trim() != format!("{CP_MAGIC} 1") {
        return Err(Error::format(origin, "not a critical-points file"));
    }
    let mut header = CpHeader {
        method: String::new(),
        dim: 0,
        model_hash: String::new(),
        extents: Vec::new(),
        cells: None,
        config: Vec::new(),
    };
    let mut declared_count = None;
    let mut records = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut toks = rest.split_whitespace();
            match toks.next() {
                Some("method") => header.method = toks.next().unwrap_or("").to_string(),
                Some("dim") => {
                    header.dim = parse(toks.next().unwrap_or(""), origin)?;
                }
                Some("model") => header.model_hash = toks.next().unwrap_or("").to_string(),
                Some("count") => {
                    declared_count = Some(parse::<usize>(toks.next().unwrap_or(""), origin)?)
                }
                Some("extents") => {
                    let vals: Vec<f64> = toks
                        .map(|t| parse::<f64>(t, origin))
                        .collect::<Result<_>>()?;
                    header.extents = vals.chunks(2).map(|c| (c[0], c[1])).collect();
                }
                Some("cells") => {
                    header.cells = Some(
                        toks.map(|t| parse::<f64>(t, origin))
                            .collect::<Result<_>>()?,
                    );
                }
                Some("config") => {
                    for pair in toks {
                        if let Some((k, v)) = pair.split_once('=') {
                            header.config.push((k.to_string(), v.to_string()));
                        }
                    }
                }
                _ => {} // columns line and unknown annotations
            }
            continue;
        }
        let d = header.dim;
        if d == 0 {
            return Err(Error::format(origin, "record before `# dim` header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 * d + 5 {
            return Err(Error::format(
                origin,
                format!("record has {} columns, expected {}", toks.len(), 2 * d + 5),
            ));
        }
        let physical: Vec<f64> = toks[..d]
            .iter()
            .map(|t| parse::<f64>(t, origin))
            .collect::<Result<_>>()?;
        let param: Vec<f64> = toks[d..2 * d]
            .iter()
            .map(|t| parse::<f64>(t, origin))
            .collect::<Result<_>>()?;
        let morse_type = MorseType::parse(toks[2 * d + 4])
            .ok_or_else(|| Error::format(origin, format!("bad type `{}`", toks[2 * d + 4])))?;
        records.push(CpRecord {
            physical,
            param,
            value: parse(toks[2 * d], origin)?,
            grad_norm: parse(toks[2 * d + 1], origin)?,
            det_hessian: parse(toks[2 * d + 2], origin)?,
            lambda: parse(toks[2 * d + 3], origin)?,
            morse_type,
        });
    }
    if let Some(count) = declared_count {
        if count != records.len() {
            return Err(Error::format(
                origin,
                format!("header declares {count} records, file has {}", records.len()),
            ));
        }
    }
    Ok(CpFile { header, records })
}
