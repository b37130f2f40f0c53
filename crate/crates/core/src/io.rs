//! Interchange formats: CSV tensors (row-major with a header line),
//! P2 ASCII PGM images, JSON network specs and parameter bundles.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcnn::GFeatureMap;
use crate::group::StabilizerGroup;
use crate::hom::PlanarKernel;
use crate::linalg::Mat;
use crate::nn::nonlin::post_activation_capsule;
use crate::nn::{
    Boundary, Capsule, FeatureMap, FiberType, LayerSpec, Network, NetworkSpec, NonlinKind, PoolKind,
};
use crate::rep::IrrepTable;

// ---------------------------------------------------------------------------
// CSV tensors
// ---------------------------------------------------------------------------

/// Feature map CSV: header `W,n,K`, then one row of `K` values per cell,
/// cells in canonical row-major order.
pub fn feature_map_to_csv(f: &FeatureMap) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{}\n",
        f.window,
        f.spatial_dim(),
        f.channels()
    ));
    for cell in 0..f.cells() {
        let row: Vec<String> = (0..f.channels())
            .map(|k| f.at(k, cell).to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn feature_map_from_csv(
    text: &str,
    fiber: FiberType,
    boundary: Boundary,
) -> Result<FeatureMap> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty feature map CSV".into()))?;
    let head: Vec<usize> = parse_usize_row(header)?;
    let [w, n, k] = head[..] else {
        return Err(Error::Parse("feature map header must be W,n,K".into()));
    };
    if n != fiber.group().n {
        return Err(Error::DimensionMismatch {
            expected: fiber.group().n,
            got: n,
        });
    }
    if k != fiber.channels() {
        return Err(Error::ChannelMismatch {
            expected: fiber.channels(),
            got: k,
        });
    }
    let mut f = FeatureMap::zeros(w, fiber, boundary)?;
    let mut count = 0usize;
    for (cell, line) in lines.enumerate() {
        let vals = parse_f64_row(line)?;
        if vals.len() != k {
            return Err(Error::Parse(format!(
                "row {cell} has {} values, expected {k}",
                vals.len()
            )));
        }
        if cell >= f.cells() {
            return Err(Error::Parse("too many rows in feature map CSV".into()));
        }
        for (ch, v) in vals.into_iter().enumerate() {
            f.set(ch, cell, v);
        }
        count += 1;
    }
    if count != f.cells() {
        return Err(Error::Parse(format!(
            "{count} rows for {} cells",
            f.cells()
        )));
    }
    Ok(f)
}

/// G-map CSV: header `W,n,|H|,K`, then cells row-major, grouped by
/// stabilizer slice.
pub fn gfeature_map_to_csv(f: &GFeatureMap) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{},{}\n",
        f.window,
        f.group().n,
        f.slices(),
        f.channels
    ));
    for slice in 0..f.slices() {
        for cell in 0..f.cells() {
            let row: Vec<String> = (0..f.channels)
                .map(|k| f.at(k, slice, cell).to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn parse_f64_row(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

fn parse_usize_row(line: &str) -> Result<Vec<usize>> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad integer `{t}`: {e}")))
        })
        .collect()
}

/// Plain matrix CSV, one row per line.
pub fn matrix_to_csv(m: &Mat) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|c| m.at(r, c).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Mat> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_f64_row)
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix CSV".into()));
    }
    Ok(Mat::from_rows(&rows))
}

/// Kernel CSV: header `K',K,s,n`, then one row per output channel holding
/// `K * s^n` values in (input channel major, cell minor) order.
pub fn kernel_to_csv(k: &PlanarKernel) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{},{}\n",
        k.out_channels, k.in_channels, k.window, k.spatial_dim
    ));
    for ko in 0..k.out_channels {
        let mut row = Vec::with_capacity(k.in_channels * k.cells());
        for ki in 0..k.in_channels {
            for cell in 0..k.cells() {
                row.push(k.at(ko, ki, cell).to_string());
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn kernel_from_csv(text: &str) -> Result<PlanarKernel> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty kernel CSV".into()))?;
    let head = parse_usize_row(header)?;
    let [ko, ki, s, n] = head[..] else {
        return Err(Error::Parse("kernel header must be K',K,s,n".into()));
    };
    let mut kernel = PlanarKernel::zeros(ko, ki, s, n);
    let cells = kernel.cells();
    let mut rows = 0usize;
    for (r, line) in lines.enumerate() {
        let vals = parse_f64_row(line)?;
        if vals.len() != ki * cells {
            return Err(Error::Parse(format!(
                "kernel row {r} has {} values, expected {}",
                vals.len(),
                ki * cells
            )));
        }
        for (i, v) in vals.into_iter().enumerate() {
            kernel.set(r, i / cells, i % cells, v);
        }
        rows += 1;
    }
    if rows != ko {
        return Err(Error::Parse(format!(
            "{rows} kernel rows for {ko} output channels"
        )));
    }
    Ok(kernel)
}

// ---------------------------------------------------------------------------
// PGM images
// ---------------------------------------------------------------------------

/// P2 ASCII PGM: zero is mid gray, the most positive value black, the
/// most negative white.
pub fn to_pgm(width: usize, height: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), width * height);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = format!("P2\n{width} {height}\n255\n");
    for r in 0..height {
        let row: Vec<String> = (0..width)
            .map(|c| {
                let v = values[r * width + c];
                let unit = if scale == 0.0 { 0.0 } else { v / scale };
                let px = ((1.0 - unit) * 127.5).round().clamp(0.0, 255.0) as u32;
                px.to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// network spec JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Clone)]
pub struct FiberEntryJson {
    pub kind: String,
    pub mult: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct LayerJson {
    pub group: String,
    pub window: usize,
    pub in_fiber: Vec<FiberEntryJson>,
    pub out_fiber: Vec<FiberEntryJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_subgroup: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct NetworkJson {
    /// Fallback group when `layers` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub window: usize,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    pub n_classes: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerJson>,
}

fn default_boundary() -> String {
    "cyclic".into()
}

fn capsule_from_json(group: &Arc<StabilizerGroup>, entry: &FiberEntryJson) -> Result<Capsule> {
    let kind = entry.kind.trim();
    if let Some(inner_kind) = kind.strip_prefix("crelu:") {
        let inner = capsule_from_json(
            group,
            &FiberEntryJson {
                kind: inner_kind.to_string(),
                mult: entry.mult,
                subgroup: entry.subgroup.clone(),
                index: entry.index,
            },
        )?;
        return post_activation_capsule(&inner, NonlinKind::CRelu);
    }
    match kind {
        "trivial" => Ok(Capsule::trivial(group.clone())),
        "regular" => Ok(Capsule::regular(group.clone())),
        "quotient" => {
            let sub = entry
                .subgroup
                .as_ref()
                .ok_or_else(|| Error::Parse("quotient capsule needs `subgroup`".into()))?;
            Capsule::quotient(group.clone(), sub)
        }
        "irrep" => {
            let idx = entry
                .index
                .ok_or_else(|| Error::Parse("irrep capsule needs `index`".into()))?;
            let table = IrrepTable::for_group(group)?;
            Capsule::irrep(&table, idx)
        }
        other => Err(Error::Parse(format!("unknown capsule kind `{other}`"))),
    }
}

fn fiber_from_json(group: &Arc<StabilizerGroup>, entries: &[FiberEntryJson]) -> Result<FiberType> {
    let built = entries
        .iter()
        .map(|e| Ok((capsule_from_json(group, e)?, e.mult)))
        .collect::<Result<Vec<_>>>()?;
    FiberType::new(built)
}

fn capsule_to_json(c: &Capsule, mult: usize) -> FiberEntryJson {
    fn kind_string(k: &crate::nn::CapsuleKind) -> (String, Option<Vec<usize>>, Option<usize>) {
        match k {
            crate::nn::CapsuleKind::Trivial => ("trivial".into(), None, None),
            crate::nn::CapsuleKind::Regular => ("regular".into(), None, None),
            crate::nn::CapsuleKind::Quotient(sub) => ("quotient".into(), Some(sub.clone()), None),
            crate::nn::CapsuleKind::Irrep(i) => ("irrep".into(), None, Some(*i)),
            crate::nn::CapsuleKind::PostCRelu(inner) => {
                let (k, sub, idx) = kind_string(inner);
                (format!("crelu:{k}"), sub, idx)
            }
        }
    }
    let (kind, subgroup, index) = kind_string(&c.kind);
    FiberEntryJson {
        kind,
        mult,
        subgroup,
        index,
    }
}

/// Parses a JSON network description into a spec plus its input fiber.
pub fn network_from_json(text: &str) -> Result<(NetworkSpec, FiberType)> {
    let json: NetworkJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("network spec: {e}")))?;
    let boundary = match json.boundary.as_str() {
        "cyclic" => Boundary::Cyclic,
        "zero" => Boundary::Zero,
        other => return Err(Error::Parse(format!("unknown boundary `{other}`"))),
    };
    let group_name = json
        .layers
        .first()
        .map(|l| l.group.clone())
        .or(json.group.clone())
        .ok_or_else(|| Error::Parse("network spec names no group".into()))?;
    let group = StabilizerGroup::build(&group_name)?;
    let mut layers = Vec::with_capacity(json.layers.len());
    for l in &json.layers {
        if l.group != group_name {
            return Err(Error::Parse("layers disagree on the group".into()));
        }
        let in_fiber = fiber_from_json(&group, &l.in_fiber)?;
        let out_fiber = fiber_from_json(&group, &l.out_fiber)?;
        let nonlin = match l.nonlin.as_deref() {
            None => None,
            Some("relu") => Some(NonlinKind::Relu),
            Some("crelu") => Some(NonlinKind::CRelu),
            Some("norm_relu") => Some(NonlinKind::NormRelu),
            Some(other) => return Err(Error::Parse(format!("unknown nonlinearity `{other}`"))),
        };
        let pool = match l.pool.as_deref() {
            None => None,
            Some("fiber_max") => Some(PoolKind::FiberMax),
            Some("quotient") => {
                let sub = l
                    .pool_subgroup
                    .clone()
                    .ok_or_else(|| Error::Parse("quotient pool needs `pool_subgroup`".into()))?;
                Some(PoolKind::Quotient(sub))
            }
            Some(other) => return Err(Error::Parse(format!("unknown pool `{other}`"))),
        };
        layers.push(LayerSpec {
            window: l.window,
            in_fiber,
            out_fiber,
            nonlin,
            pool,
        });
    }
    let input_fiber = match layers.first() {
        Some(l) => l.in_fiber.clone(),
        None => FiberType::input(group.clone(), json.input_channels),
    };
    let spec = NetworkSpec {
        map_window: json.window,
        boundary,
        layers,
        n_classes: json.n_classes,
    };
    Ok((spec, input_fiber))
}

pub fn network_to_json(spec: &NetworkSpec, input_fiber: &FiberType) -> NetworkJson {
    let group = input_fiber.group();
    NetworkJson {
        group: Some(group.name.clone()),
        window: spec.map_window,
        boundary: match spec.boundary {
            Boundary::Cyclic => "cyclic".into(),
            Boundary::Zero => "zero".into(),
        },
        n_classes: spec.n_classes,
        input_channels: input_fiber.channels(),
        layers: spec
            .layers
            .iter()
            .map(|l| LayerJson {
                group: group.name.clone(),
                window: l.window,
                in_fiber: l
                    .in_fiber
                    .entries
                    .iter()
                    .map(|(c, m)| capsule_to_json(c, *m))
                    .collect(),
                out_fiber: l
                    .out_fiber
                    .entries
                    .iter()
                    .map(|(c, m)| capsule_to_json(c, *m))
                    .collect(),
                nonlin: l.nonlin.map(|n| n.name().to_string()),
                pool: l.pool.as_ref().map(|p| match p {
                    PoolKind::FiberMax => "fiber_max".to_string(),
                    PoolKind::Quotient(_) => "quotient".to_string(),
                }),
                pool_subgroup: l.pool.as_ref().and_then(|p| match p {
                    PoolKind::Quotient(sub) => Some(sub.clone()),
                    PoolKind::FiberMax => None,
                }),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// parameter bundles
// ---------------------------------------------------------------------------

/// Writes the trainable state as a CSV bundle: one file per parameter
/// block. A saved bundle can be loaded back into a network synthesized
/// from the same spec.
pub fn save_params(net: &Network, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (l, layer) in net.layers.iter().enumerate() {
        for (i, row) in layer.phi.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                fs::write(dir.join(format!("phi_l{l}_{i}_{j}.csv")), matrix_to_csv(m))?;
            }
        }
        if !layer.norm_biases.is_empty() {
            let text: Vec<String> = layer.norm_biases.iter().map(|b| b.to_string()).collect();
            fs::write(dir.join(format!("norm_l{l}.csv")), text.join(",") + "\n")?;
        }
    }
    fs::write(dir.join("head_w.csv"), matrix_to_csv(&net.head.weights))?;
    let bias: Vec<String> = net.head.bias.iter().map(|b| b.to_string()).collect();
    fs::write(dir.join("head_b.csv"), bias.join(",") + "\n")?;
    Ok(())
}

/// Loads a parameter bundle saved by [`save_params`]. A file named
/// `kernel_l{i}.csv` installs a raw kernel override for that layer, which
/// the verifier then checks as-is.
pub fn load_params(net: &mut Network, dir: &Path) -> Result<()> {
    for (l, layer) in net.layers.iter_mut().enumerate() {
        for (i, row) in layer.phi.iter_mut().enumerate() {
            for (j, m) in row.iter_mut().enumerate() {
                let path = dir.join(format!("phi_l{l}_{i}_{j}.csv"));
                let loaded = matrix_from_csv(&fs::read_to_string(&path)?)?;
                if loaded.rows() != m.rows() || loaded.cols() != m.cols() {
                    return Err(Error::ShapeMismatch(format!(
                        "{}: {}x{} loaded, expected {}x{}",
                        path.display(),
                        loaded.rows(),
                        loaded.cols(),
                        m.rows(),
                        m.cols()
                    )));
                }
                *m = loaded;
            }
        }
        if !layer.norm_biases.is_empty() {
            let path = dir.join(format!("norm_l{l}.csv"));
            let vals = parse_f64_row(fs::read_to_string(&path)?.trim())?;
            if vals.len() != layer.norm_biases.len() {
                return Err(Error::ShapeMismatch(format!("{} norm biases", vals.len())));
            }
            layer.norm_biases = vals;
        }
        let kernel_path = dir.join(format!("kernel_l{l}.csv"));
        if kernel_path.exists() {
            layer.raw_kernel = Some(kernel_from_csv(&fs::read_to_string(&kernel_path)?)?);
        }
    }
    let w = matrix_from_csv(&fs::read_to_string(dir.join("head_w.csv"))?)?;
    if w.rows() != net.head.weights.rows() || w.cols() != net.head.weights.cols() {
        return Err(Error::ShapeMismatch("head weight shape".into()));
    }
    net.head.weights = w;
    let bias = parse_f64_row(fs::read_to_string(dir.join("head_b.csv"))?.trim())?;
    if bias.len() != net.head.bias.len() {
        return Err(Error::ShapeMismatch("head bias length".into()));
    }
    net.head.bias = bias;
    Ok(())
}
