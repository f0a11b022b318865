//! Sparse bag-of-words corpora: the count matrix type the sampler consumes,
//! vocabulary bookkeeping, frequency-based vocabulary filtering, and
//! per-document token holdout for evaluation.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Term strings in index order, so `terms[v]` names matrix row `v`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Self {
        Vocabulary { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, v: usize) -> &str {
        &self.terms[v]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Numbered fallback names `term0..term{V-1}` for corpora without a
    /// vocabulary file.
    pub fn numbered(n_terms: usize) -> Self {
        let mut terms = Vec::with_capacity(n_terms);
        for v in 0..n_terms {
            let mut s = String::from("term");
            s.push_str(&v.to_string());
            terms.push(s);
        }
        Vocabulary { terms }
    }
}

/// Term-by-document count matrix, stored per document as sorted
/// `(term, count)` pairs with strictly positive counts. Documents with no
/// tokens are legal and stay in place so document indices remain stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n_terms: usize,
    docs: Vec<Vec<(u32, u32)>>,
}

impl CountMatrix {
    /// Build from per-document entry lists. Entries are sorted, zero counts
    /// dropped, and duplicate terms within a document merged.
    pub fn from_docs(n_terms: usize, docs: Vec<Vec<(u32, u32)>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(docs.len());
        for mut doc in docs {
            doc.retain(|&(_, c)| c > 0);
            doc.sort_unstable_by_key(|&(v, _)| v);
            let mut merged: Vec<(u32, u32)> = Vec::with_capacity(doc.len());
            for (v, c) in doc {
                if v as usize >= n_terms {
                    return Err(Error::DimensionMismatch("term index outside vocabulary"));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += c,
                    _ => merged.push((v, c)),
                }
            }
            clean.push(merged);
        }
        Ok(CountMatrix { n_terms, docs: clean })
    }

    /// Empty corpus over a vocabulary of `n_terms`.
    pub fn empty(n_terms: usize, n_docs: usize) -> Self {
        CountMatrix { n_terms, docs: vec![Vec::new(); n_docs] }
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    /// Sorted `(term, count)` entries of one document.
    pub fn doc(&self, j: usize) -> &[(u32, u32)] {
        &self.docs[j]
    }

    /// Token count of one document.
    pub fn doc_total(&self, j: usize) -> u64 {
        self.docs[j].iter().map(|&(_, c)| u64::from(c)).sum()
    }

    /// Token count of the whole corpus.
    pub fn total(&self) -> u64 {
        (0..self.n_docs()).map(|j| self.doc_total(j)).sum()
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Per-term total counts across all documents.
    pub fn term_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_terms];
        for doc in &self.docs {
            for &(v, c) in doc {
                totals[v as usize] += u64::from(c);
            }
        }
        totals
    }

    /// Per-term number of documents the term occurs in.
    pub fn doc_frequencies(&self) -> Vec<u32> {
        let mut freq = vec![0u32; self.n_terms];
        for doc in &self.docs {
            for &(v, _) in doc {
                freq[v as usize] += 1;
            }
        }
        freq
    }
}

/// Train/held-out partition of a corpus at the token level. Both halves
/// share the document layout of the source matrix; entry-wise,
/// `train + heldout` reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldoutMask {
    pub train: CountMatrix,
    pub heldout: CountMatrix,
}

/// Drop stoplisted or rare terms and reindex the survivors.
///
/// A term survives if it is not stoplisted (by index into the current
/// vocabulary) and its corpus-wide count reaches `min_count`. Documents are
/// recounted over the surviving terms; documents left empty stay in the
/// corpus so indices keep their meaning.
pub fn filter_vocab(
    matrix: &CountMatrix,
    vocab: &Vocabulary,
    stop: &[usize],
    min_count: u64,
) -> Result<(CountMatrix, Vocabulary)> {
    if vocab.len() != matrix.n_terms() {
        return Err(Error::DimensionMismatch("vocabulary size vs matrix terms"));
    }
    let totals = matrix.term_totals();
    let mut keep = vec![true; matrix.n_terms()];
    for &s in stop {
        if s >= keep.len() {
            return Err(Error::DimensionMismatch("stoplist index outside vocabulary"));
        }
        keep[s] = false;
    }
    for (v, flag) in keep.iter_mut().enumerate() {
        if totals[v] < min_count {
            *flag = false;
        }
    }
    let mut remap = vec![u32::MAX; matrix.n_terms()];
    let mut terms = Vec::new();
    for (v, &flag) in keep.iter().enumerate() {
        if flag {
            remap[v] = terms.len() as u32;
            terms.push(vocab.term(v).to_string());
        }
    }
    let docs = matrix
        .docs
        .iter()
        .map(|doc| {
            doc.iter()
                .filter(|&&(v, _)| keep[v as usize])
                .map(|&(v, c)| (remap[v as usize], c))
                .collect()
        })
        .collect();
    let filtered = CountMatrix::from_docs(terms.len(), docs)?;
    Ok((filtered, Vocabulary::new(terms)))
}

/// Split each document's tokens into a training part and a held-out part.
///
/// `fraction` is the share that trains: exactly
/// `round(fraction * doc_total)` tokens go to the training half (round half
/// up), selected uniformly without replacement across the document's token
/// instances, so each entry's training count follows the matching
/// hypergeometric law. The two halves add back to the source matrix entry
/// by entry.
pub fn mask_tokens(matrix: &CountMatrix, fraction: f64, rng: &mut StreamRng) -> Result<HeldoutMask> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter("training fraction must lie in [0, 1]"));
    }
    let mut train_docs = Vec::with_capacity(matrix.n_docs());
    let mut held_docs = Vec::with_capacity(matrix.n_docs());
    for j in 0..matrix.n_docs() {
        let total = matrix.doc_total(j);
        // Round half up without floating-point edge surprises near .5:
        // floor(x + 1/2) on an exact dyadic is still bitwise reliable for
        // the magnitudes involved (counts well below 2^52).
        let take = crate::math::floor(fraction * total as f64 + 0.5) as u64;
        let mut remaining_total = total;
        let mut remaining_take = take.min(total);
        let mut train_doc = Vec::new();
        let mut held_doc = Vec::new();
        for &(v, c) in matrix.doc(j) {
            // Sequential hypergeometric thinning: each token instance of
            // this entry joins the training half with probability
            // remaining_take / remaining_total, updated draw by draw.
            let mut to_train = 0u32;
            for _ in 0..c {
                if remaining_take > 0 && rng.bernoulli(remaining_take as f64 / remaining_total as f64)
                {
                    to_train += 1;
                    remaining_take -= 1;
                }
                remaining_total -= 1;
            }
            if to_train > 0 {
                train_doc.push((v, to_train));
            }
            if c - to_train > 0 {
                held_doc.push((v, c - to_train));
            }
        }
        train_docs.push(train_doc);
        held_docs.push(held_doc);
    }
    Ok(HeldoutMask {
        train: CountMatrix::from_docs(matrix.n_terms(), train_docs)?,
        heldout: CountMatrix::from_docs(matrix.n_terms(), held_docs)?,
    })
}

/// Parse the three-header sparse bag-of-words layout: document count, term
/// count, and entry count on the first three lines, then one
/// `doc term count` triple per line with 1-based indices.
pub fn parse_bow(text: &str) -> Result<CountMatrix> {
    let mut lines = text.lines().enumerate();
    let mut header = [0usize; 3];
    for slot in &mut header {
        let (idx, line) = loop {
            match lines.next() {
                Some((i, l)) if !l.trim().is_empty() => break (i, l),
                Some(_) => continue,
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: "missing header (documents, terms, entries)".to_string(),
                    })
                }
            }
        };
        *slot = line.trim().parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: "header line must be a nonnegative integer".to_string(),
        })?;
    }
    let [n_docs, n_terms, nnz] = header;
    let mut docs = vec![Vec::new(); n_docs];
    let mut seen = 0usize;
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next_num = |what: &str| -> Result<u64> {
            fields
                .next()
                .ok_or(())
                .and_then(|f| f.parse().map_err(|_| ()))
                .map_err(|_| Error::Parse { line: idx + 1, msg: alloc::format!("expected {what}") })
        };
        let doc = next_num("document id")?;
        let term = next_num("term id")?;
        let count = next_num("count")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: "expected exactly three fields".to_string(),
            });
        }
        if doc == 0 || doc as usize > n_docs {
            return Err(Error::Parse {
                line: idx + 1,
                msg: alloc::format!("document id {doc} outside 1..={n_docs}"),
            });
        }
        if term == 0 || term as usize > n_terms {
            return Err(Error::Parse {
                line: idx + 1,
                msg: alloc::format!("term id {term} outside 1..={n_terms}"),
            });
        }
        if count == 0 || count > u64::from(u32::MAX) {
            return Err(Error::Parse {
                line: idx + 1,
                msg: alloc::format!("count {count} outside 1..=2^32-1"),
            });
        }
        docs[doc as usize - 1].push((term as u32 - 1, count as u32));
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse {
            line: 0,
            msg: alloc::format!("header promised {nnz} entries, found {seen}"),
        });
    }
    CountMatrix::from_docs(n_terms, docs)
}

/// Render a corpus back into the three-header sparse layout parsed by
/// [`parse_bow`]. Round-trips exactly.
pub fn write_bow(matrix: &CountMatrix) -> String {
    let mut out = String::new();
    out.push_str(&alloc::format!("{}\n{}\n{}\n", matrix.n_docs(), matrix.n_terms(), matrix.nnz()));
    for j in 0..matrix.n_docs() {
        for &(v, c) in matrix.doc(j) {
            out.push_str(&alloc::format!("{} {} {}\n", j + 1, v + 1, c));
        }
    }
    out
}
