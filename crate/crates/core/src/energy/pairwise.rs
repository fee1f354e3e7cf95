use super::{EnergyModel, Evaluation};
use crate::error::{Error, Result};
use crate::matrix::{mat_t_vec, mat_vec, Matrix};
use crate::numeric::{row_marginals_unchecked, softmax_backward};
use crate::textfmt::{Document, Section};

/// Coupling between sites `i` and `j`: contributes `q_i^T M q_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contact {
    pub i: usize,
    pub j: usize,
    pub coupling: Matrix,
}

/// `E(l) = sum_(i,j) q_i^T M_ij q_j + sum_i q_i^T h_i` with `q = softmax(l)`.
///
/// Multilinear in the marginals, so restricted to one-hot rows it is a Potts
/// energy over token sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseContactEnergy {
    length: usize,
    vocab: usize,
    contacts: Vec<Contact>,
    fields: Matrix,
}

impl PairwiseContactEnergy {
    pub fn new(fields: Matrix, contacts: Vec<Contact>) -> Result<Self> {
        let (length, vocab) = fields.shape();
        if length < 1 || vocab < 2 {
            return Err(Error::InvalidInput("fields must be at least 1x2".into()));
        }
        fields.ensure_finite()?;
        for c in &contacts {
            if c.i >= length || c.j >= length || c.i == c.j {
                return Err(Error::InvalidInput(format!(
                    "contact ({}, {}) is not a pair of distinct sites below {length}",
                    c.i, c.j
                )));
            }
            c.coupling
                .ensure_shape(&format!("contact ({}, {})", c.i, c.j), (vocab, vocab))?;
            c.coupling.ensure_finite()?;
        }
        Ok(Self {
            length,
            vocab,
            contacts,
            fields,
        })
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn fields(&self) -> &Matrix {
        &self.fields
    }

    /// Energy gradient with respect to the marginals.
    fn marginal_gradient(&self, q: &Matrix) -> (f64, Matrix) {
        let mut grad = self.fields.clone();
        let mut energy: f64 = q
            .as_slice()
            .iter()
            .zip(self.fields.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let mut mq = vec![0.0; self.vocab];
        let mut mtq = vec![0.0; self.vocab];
        for c in &self.contacts {
            mat_vec(&c.coupling, q.row(c.j), &mut mq);
            mat_t_vec(&c.coupling, q.row(c.i), &mut mtq);
            energy += q.row(c.i).iter().zip(&mq).map(|(a, b)| a * b).sum::<f64>();
            for (g, v) in grad.row_mut(c.i).iter_mut().zip(&mq) {
                *g += v;
            }
            for (g, v) in grad.row_mut(c.j).iter_mut().zip(&mtq) {
                *g += v;
            }
        }
        (energy, grad)
    }

    /// Energy of a one-hot encoded token sequence.
    pub fn discrete_energy(&self, tokens: &[usize]) -> f64 {
        let mut e: f64 = tokens.iter().enumerate().map(|(i, &t)| self.fields.get(i, t)).sum();
        for c in &self.contacts {
            e += c.coupling.get(tokens[c.i], tokens[c.j]);
        }
        e
    }

    pub fn to_document(&self, seed: u64) -> Document {
        let mut doc = Document::new(seed);
        doc.push(
            Section::new("contact_energy")
                .entry("length", self.length)
                .entry("vocab", self.vocab)
                .entry("contacts", self.contacts.len()),
        );
        doc.push(
            Section::new("field")
                .arg(self.length)
                .arg(self.vocab)
                .matrix(&self.fields),
        );
        for c in &self.contacts {
            doc.push(Section::new("contact").arg(c.i).arg(c.j).matrix(&c.coupling));
        }
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let head = doc.section("contact_energy")?;
        let length: usize = head.get("length")?;
        let vocab: usize = head.get("vocab")?;
        let count: usize = head.get("contacts")?;
        let fields = doc.section("field")?.to_matrix(length, vocab)?;
        let contacts = doc
            .sections_named("contact")
            .map(|s| {
                Ok(Contact {
                    i: s.arg_at(0)?,
                    j: s.arg_at(1)?,
                    coupling: s.to_matrix(vocab, vocab)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if contacts.len() != count {
            return Err(Error::Parse {
                line: head.line(),
                message: format!("expected {count} contacts, found {}", contacts.len()),
            });
        }
        Self::new(fields, contacts)
    }
}

impl EnergyModel for PairwiseContactEnergy {
    fn dims(&self) -> (usize, usize) {
        (self.length, self.vocab)
    }

    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        let q = row_marginals_unchecked(logits);
        let (energy, grad_q) = self.marginal_gradient(&q);
        Evaluation {
            energy,
            gradient: softmax_backward(&q, &grad_q),
        }
    }

    fn label(&self) -> &str {
        "pairwise_contact"
    }
}
