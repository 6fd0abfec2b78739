//! Document neighbor graph and the manifold regularizer over it.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Tf,
    TfIdf,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tf" => Ok(Similarity::Tf),
            "tfidf" => Ok(Similarity::TfIdf),
            other => Err(Error::Config(format!("unknown similarity {other:?}, expected tf or tfidf"))),
        }
    }
}

impl std::fmt::Display for Similarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Similarity::Tf => "tf",
            Similarity::TfIdf => "tfidf",
        })
    }
}

/// Symmetric binary neighbor relation stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentGraph {
    adjacency: Vec<Vec<u32>>,
}

impl DocumentGraph {
    /// Builds the symmetric closure of a directed neighbor relation.
    pub fn from_neighbor_lists(lists: &[Vec<u32>]) -> Self {
        let mut adjacency = vec![Vec::new(); lists.len()];
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                if j as usize == i {
                    continue;
                }
                adjacency[i].push(j);
                adjacency[j as usize].push(i as u32);
            }
        }
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
        }
        Self { adjacency }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, d: usize) -> &[u32] {
        &self.adjacency[d]
    }

    pub fn degree(&self, d: usize) -> usize {
        self.adjacency[d].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&(j as u32)).is_ok()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j as usize > i).map(move |&j| (i, j as usize)))
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, j) in self.edges() {
            writeln!(out, "{i}\t{j}").expect("write to string");
        }
        std::fs::write(path, out).map_err(|source| Error::Write { path: path.to_path_buf(), source })
    }
}

fn document_vectors(corpus: &Corpus, similarity: Similarity) -> Vec<Vec<(u32, f64)>> {
    let idf: Option<Vec<f64>> = match similarity {
        Similarity::Tf => None,
        Similarity::TfIdf => {
            let mut df = vec![0usize; corpus.vocab_size()];
            for doc in corpus.documents() {
                for &(v, _) in &doc.tf {
                    df[v as usize] += 1;
                }
            }
            let n = corpus.num_docs() as f64;
            Some(df.iter().map(|&c| (n / c.max(1) as f64).ln() + 1.0).collect())
        }
    };
    corpus
        .documents()
        .iter()
        .map(|doc| {
            let mut w: Vec<(u32, f64)> =
                doc.tf.iter().map(|&(v, c)| (v, c as f64 * idf.as_ref().map_or(1.0, |idf| idf[v as usize]))).collect();
            let norm = w.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
            for (_, x) in &mut w {
                *x /= norm;
            }
            w
        })
        .collect()
}

/// Connects each document to its `k_neighbors` most cosine-similar
/// documents, then symmetrizes. Equal similarities go to the lower id.
pub fn build_document_graph(corpus: &Corpus, k_neighbors: usize, similarity: Similarity) -> Result<DocumentGraph> {
    let n = corpus.num_docs();
    if n < k_neighbors + 1 {
        return Err(Error::InvalidInput(format!("{n} documents cannot each have {k_neighbors} neighbors")));
    }
    let vectors = document_vectors(corpus, similarity);
    let mut postings: Vec<Vec<(u32, f64)>> = vec![Vec::new(); corpus.vocab_size()];
    for (d, vec) in vectors.iter().enumerate() {
        for &(v, x) in vec {
            postings[v as usize].push((d as u32, x));
        }
    }

    let lists: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], Vec::<u32>::new()),
            |(scores, touched), i| {
                for &(v, x) in &vectors[i] {
                    for &(j, y) in &postings[v as usize] {
                        if scores[j as usize] == 0.0 {
                            touched.push(j);
                        }
                        scores[j as usize] += x * y;
                    }
                }
                let mut candidates: Vec<(u32, f64)> =
                    touched.iter().filter(|&&j| j as usize != i).map(|&j| (j, scores[j as usize])).collect();
                for &j in touched.iter() {
                    scores[j as usize] = 0.0;
                }
                touched.clear();
                candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                candidates.truncate(k_neighbors);
                let mut picked: Vec<u32> = candidates.into_iter().map(|(j, _)| j).collect();
                // documents sharing no word with anyone are padded with the lowest ids
                let mut j = 0u32;
                while picked.len() < k_neighbors {
                    if j as usize != i && !picked.contains(&j) {
                        picked.push(j);
                    }
                    j += 1;
                }
                picked
            },
        )
        .collect();
    Ok(DocumentGraph::from_neighbor_lists(&lists))
}

/// `½ Σ_k Σ_{i,j} (θ_ik − θ_jk)² W_ij`.
pub fn manifold_penalty(theta: &Array2<f64>, graph: &DocumentGraph) -> f64 {
    let mut total = 0.0;
    for i in 0..graph.num_nodes() {
        let row_i = theta.row(i);
        for &j in graph.neighbors(i) {
            let row_j = theta.row(j as usize);
            total += row_i.iter().zip(row_j.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
    }
    0.5 * total
}

/// One smoothing step `θ_d ← (1−κ)θ_d + κ·mean of neighbor rows`, each row
/// renormalized to the simplex. Isolated documents are left unchanged.
pub fn neighbor_smoothing_step(theta: &Array2<f64>, graph: &DocumentGraph, kappa: f64) -> Array2<f64> {
    let mut out = theta.clone();
    for (d, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let neighbors = graph.neighbors(d);
        if neighbors.is_empty() {
            continue;
        }
        let inv = 1.0 / neighbors.len() as f64;
        for k in 0..row.len() {
            let mean: f64 = neighbors.iter().map(|&j| theta[[j as usize, k]]).sum::<f64>() * inv;
            row[k] = (1.0 - kappa) * theta[[d, k]] + kappa * mean;
        }
        let total: f64 = row.sum();
        row /= total;
    }
    out
}
