//! Dataset manifest and the line-oriented feature/edge file formats.
//!
//! Feature files hold one record per line: the dense node id followed by `d`
//! whitespace-separated floats. Edge files hold one edge per line (`src dst`,
//! `author paper`, or `src dst aspect`). Blank lines and lines starting with
//! `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AspectEdge, AspectId, HeteroGraph, ValidationIssue, PWC_ASPECTS, RIM_ASPECTS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// `"rim"` or `"pwc"` selects the default aspect names when `aspects` is
    /// not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<Vec<String>>,
    pub paper_features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authorship: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_edges: Option<PathBuf>,
    /// Optional `citing cited` list kept for coupling/co-citation analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directed_citations: Option<PathBuf>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    fn aspect_names(&self) -> Result<Vec<String>> {
        if let Some(names) = &self.aspects {
            if names.is_empty() {
                return Err(Error::Manifest("aspect list is empty".into()));
            }
            return Ok(names.clone());
        }
        let defaults: &[&str] = match self.format.as_deref().map(str::to_lowercase).as_deref() {
            Some("rim") | None => &RIM_ASPECTS,
            Some("pwc") => &PWC_ASPECTS,
            Some(other) => {
                return Err(Error::Manifest(format!(
                    "unknown format {other:?} and no aspect list given"
                )))
            }
        };
        Ok(defaults.iter().map(|s| s.to_string()).collect())
    }
}

fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_features(path: &Path) -> Result<Matrix> {
    let lines = data_lines(path)?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; lines.len()];
    let mut dim = None;
    for (lineno, line) in &lines {
        let mut fields = line.split_whitespace();
        let id: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(path, *lineno, "expected a node id"))?;
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(path, *lineno, format!("bad float {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(path, *lineno, format!("non-finite feature value {bad}")));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "{}:{lineno}: expected {d} values, found {}",
                    path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        if id >= rows.len() {
            return Err(parse_err(
                path,
                *lineno,
                format!("node id {id} is not dense (only {} records)", rows.len()),
            ));
        }
        if rows[id].replace(values).is_some() {
            return Err(parse_err(path, *lineno, format!("duplicate node id {id}")));
        }
    }
    let d = dim.unwrap_or(0);
    if d == 0 && !lines.is_empty() {
        return Err(parse_err(path, lines[0].0, "feature records carry no values"));
    }
    let data: Vec<f64> = rows.into_iter().flatten().flatten().collect();
    Ok(Matrix::from_vec(data.len() / d.max(1), d, data))
}

fn read_edges<const N: usize>(path: &Path, bounds: [usize; N]) -> Result<Vec<[usize; N]>> {
    let mut out = Vec::new();
    for (lineno, line) in data_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {N} fields, found {}", fields.len()),
            ));
        }
        let mut edge = [0usize; N];
        for (k, f) in fields.iter().enumerate() {
            edge[k] = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad id {f:?}")))?;
            if edge[k] >= bounds[k] {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("id {} out of range (limit {})", edge[k], bounds[k]),
                ));
            }
        }
        out.push(edge);
    }
    Ok(out)
}

/// Reads a manifest and every file it names, then builds and validates the
/// graph. Relative paths resolve against the manifest's directory.
pub fn load_graph(manifest_path: &Path) -> Result<(HeteroGraph, Vec<ValidationIssue>)> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| base.join(p);

    let names = manifest.aspect_names()?;
    let paper_features = read_features(&resolve(&manifest.paper_features))?;
    let author_features = match &manifest.author_features {
        Some(p) => read_features(&resolve(p))?,
        None => Matrix::zeros(0, paper_features.cols()),
    };
    if author_features.rows() > 0 && author_features.cols() != paper_features.cols() {
        return Err(Error::DimensionMismatch(format!(
            "paper features have d={} but author features have d={}",
            paper_features.cols(),
            author_features.cols()
        )));
    }
    let np = paper_features.rows();
    let na = author_features.rows();

    let citations: Vec<(usize, usize)> = match &manifest.citations {
        Some(p) => read_edges(&resolve(p), [np, np])?
            .into_iter()
            .map(|[s, d]| (s, d))
            .collect(),
        None => Vec::new(),
    };
    let authorships: Vec<(usize, usize)> = match &manifest.authorship {
        Some(p) => read_edges(&resolve(p), [na, np])?
            .into_iter()
            .map(|[a, p]| (a, p))
            .collect(),
        None => Vec::new(),
    };
    let aspects: Vec<AspectEdge> = match &manifest.aspect_edges {
        Some(p) => read_edges(&resolve(p), [np, np, names.len()])?
            .into_iter()
            .map(|[a, b, k]| AspectEdge::new(a, b, AspectId(k)))
            .collect(),
        None => Vec::new(),
    };

    let (mut graph, issues) = HeteroGraph::build(
        paper_features,
        author_features,
        &citations,
        &authorships,
        &aspects,
        names,
    )?;
    if let Some(p) = &manifest.directed_citations {
        let directed = read_edges(&resolve(p), [np, np])?
            .into_iter()
            .map(|[s, d]| (s, d))
            .collect();
        graph = graph.with_directed_citations(directed);
    }
    Ok((graph, issues))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn feature_text(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        s.push_str(&i.to_string());
        for v in m.row(i) {
            s.push(' ');
            // `{:?}` is the shortest representation that parses back exactly.
            s.push_str(&format!("{v:?}"));
        }
        s.push('\n');
    }
    s
}

/// Writes `graph` into `dir` using the manifest layout and returns the
/// manifest path.
pub fn save_graph(graph: &HeteroGraph, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("papers.txt"), &feature_text(graph.paper_features()))?;
    write_file(&dir.join("authors.txt"), &feature_text(graph.author_features()))?;

    let mut cites = String::from("# src dst\n");
    for (a, b) in graph.citation_edges() {
        cites.push_str(&format!("{a} {b}\n"));
    }
    write_file(&dir.join("citations.txt"), &cites)?;

    let mut auth = String::from("# author paper\n");
    for (a, p) in graph.authorship_edges() {
        auth.push_str(&format!("{a} {p}\n"));
    }
    write_file(&dir.join("authorship.txt"), &auth)?;

    let mut asp = String::from("# src dst aspect\n");
    for e in graph.aspect_edges() {
        asp.push_str(&format!("{} {} {}\n", e.a, e.b, e.aspect.0));
    }
    write_file(&dir.join("aspects.txt"), &asp)?;

    let mut manifest = Manifest {
        format: None,
        aspects: Some(graph.aspect_names().to_vec()),
        paper_features: "papers.txt".into(),
        author_features: Some("authors.txt".into()),
        citations: Some("citations.txt".into()),
        authorship: Some("authorship.txt".into()),
        aspect_edges: Some("aspects.txt".into()),
        directed_citations: None,
    };
    if let Some(directed) = graph.directed_citations() {
        let mut text = String::from("# citing cited\n");
        for (s, d) in directed {
            text.push_str(&format!("{s} {d}\n"));
        }
        write_file(&dir.join("directed_citations.txt"), &text)?;
        manifest.directed_citations = Some("directed_citations.txt".into());
    }
    let path = dir.join("manifest.json");
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}
