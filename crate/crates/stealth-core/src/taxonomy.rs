//! Healthcare skill taxonomy and competence similarity.
//!
//! Competences are organized in a rooted tree. The similarity of a competence
//! to the reference competence (`doctor`, the highest healthcare knowledge) is
//! `2*N3 / (N1 + N2)` where `N1` and `N2` are the edge distances of the
//! reference and the evaluated competence to the root, and `N3` is the edge
//! distance of their deepest common ancestor to the root. The `other`
//! competence is pinned to similarity 0 regardless of its position.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Reference competence for similarity scoring.
pub const REFERENCE_SKILL: &str = "doctor";

/// Competence label that always scores zero similarity.
pub const OTHER_SKILL: &str = "other";

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("unknown skill label: {0}")]
    UnknownSkill(String),
    #[error("taxonomy parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("taxonomy is not a connected tree: {0}")]
    NotATree(String),
}

/// Similarity of a competence to the reference competence, in `[0, 1]`.
///
/// 1 exactly for the reference competence, 0 exactly for `other`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0)
    }
}

/// Rooted tree of competence labels.
///
/// Immutable after construction; lookups are case-insensitive (labels are
/// normalized to lowercase). Safe to share across threads.
#[derive(Debug, Clone)]
pub struct SkillTaxonomy {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    depth: Vec<u32>,
    root: usize,
}

fn normalize(label: &str) -> String {
    label.trim().to_ascii_lowercase()
}

impl SkillTaxonomy {
    /// Builds a taxonomy from `(child, parent)` edges plus the root label.
    ///
    /// Rejects duplicate children, unknown parents, cycles and disconnected
    /// labels. Labels are normalized to lowercase first.
    pub fn from_edges(root: &str, edges: &[(String, String)]) -> Result<Self, TaxonomyError> {
        let root_label = normalize(root);
        if root_label.is_empty() {
            return Err(TaxonomyError::Parse {
                line: 0,
                reason: "empty root label".into(),
            });
        }

        let mut labels = vec![root_label.clone()];
        let mut index = HashMap::new();
        index.insert(root_label, 0usize);
        let mut parent_label: Vec<Option<String>> = vec![None];

        for (child, par) in edges {
            let child = normalize(child);
            let par = normalize(par);
            if child.is_empty() || par.is_empty() {
                return Err(TaxonomyError::Parse {
                    line: 0,
                    reason: "empty label in edge".into(),
                });
            }
            if index.contains_key(&child) {
                return Err(TaxonomyError::NotATree(format!(
                    "label {child} declared more than once"
                )));
            }
            index.insert(child.clone(), labels.len());
            labels.push(child);
            parent_label.push(Some(par));
        }

        // Resolve parent labels to indices; every parent must be declared.
        let mut parent = Vec::with_capacity(labels.len());
        for (i, pl) in parent_label.iter().enumerate() {
            match pl {
                None => parent.push(None),
                Some(p) => match index.get(p) {
                    Some(&pi) => parent.push(Some(pi)),
                    None => {
                        return Err(TaxonomyError::NotATree(format!(
                            "parent {p} of {} is not declared",
                            labels[i]
                        )))
                    }
                },
            }
        }

        // Depth by walking parent links; a walk longer than the node count
        // means a cycle.
        let n = labels.len();
        let mut depth = vec![0u32; n];
        for i in 0..n {
            let mut steps = 0u32;
            let mut cur = i;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps as usize > n {
                    return Err(TaxonomyError::NotATree(format!(
                        "cycle through label {}",
                        labels[i]
                    )));
                }
            }
            if cur != 0 {
                return Err(TaxonomyError::NotATree(format!(
                    "label {} does not reach the root",
                    labels[i]
                )));
            }
            depth[i] = steps;
        }

        Ok(SkillTaxonomy {
            labels,
            index,
            parent,
            depth,
            root: 0,
        })
    }

    /// Parses the edge-list config format: one `child<TAB>parent` per line,
    /// the root declared as `label<TAB>-`. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut root: Option<String> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (child, par) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(p), None) => (c.trim(), p.trim()),
                _ => {
                    return Err(TaxonomyError::Parse {
                        line: lineno + 1,
                        reason: "expected `child<TAB>parent`".into(),
                    })
                }
            };
            if par == "-" {
                if root.is_some() {
                    return Err(TaxonomyError::Parse {
                        line: lineno + 1,
                        reason: "multiple root declarations".into(),
                    });
                }
                root = Some(child.to_string());
            } else {
                edges.push((child.to_string(), par.to_string()));
            }
        }
        let root = root.ok_or(TaxonomyError::Parse {
            line: 0,
            reason: "missing root declaration (`label<TAB>-`)".into(),
        })?;
        Self::from_edges(&root, &edges)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|e| TaxonomyError::Parse {
            line: 0,
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// The built-in healthcare taxonomy.
    ///
    /// Two branches under `health` hold people with healthcare knowledge:
    /// `medicine` (doctors) and `nursing` (nurses plus `practitioner`, a class
    /// of professionals with reduced health skills: caregivers, police
    /// officers, firefighters, life-saving). `other` sits outside the health
    /// subtree.
    pub fn healthcare_default() -> SkillTaxonomy {
        Self::parse(DEFAULT_TAXONOMY_CONFIG).expect("built-in taxonomy is valid")
    }

    pub fn contains(&self, skill: &str) -> bool {
        self.index.contains_key(&normalize(skill))
    }

    pub fn root_label(&self) -> &str {
        &self.labels[self.root]
    }

    /// Labels in declaration order (root first).
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn resolve(&self, skill: &str) -> Result<usize, TaxonomyError> {
        self.index
            .get(&normalize(skill))
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownSkill(skill.to_string()))
    }

    /// Stable index of a label, used as the wire encoding of a competence.
    pub fn label_index(&self, skill: &str) -> Result<usize, TaxonomyError> {
        self.resolve(skill)
    }

    pub fn parent_of(&self, skill: &str) -> Result<Option<&str>, TaxonomyError> {
        let i = self.resolve(skill)?;
        Ok(self.parent[i].map(|p| self.labels[p].as_str()))
    }

    /// Number of parent links from `skill` up to the root.
    pub fn depth_to_root(&self, skill: &str) -> Result<u32, TaxonomyError> {
        Ok(self.depth[self.resolve(skill)?])
    }

    fn ancestors(&self, mut i: usize) -> Vec<usize> {
        let mut chain = vec![i];
        while let Some(p) = self.parent[i] {
            chain.push(p);
            i = p;
        }
        chain
    }

    /// Deepest common ancestor of two labels (edge depth from root).
    fn common_ancestor_depth(&self, a: usize, b: usize) -> u32 {
        let mut on_a_path = vec![false; self.labels.len()];
        for i in self.ancestors(a) {
            on_a_path[i] = true;
        }
        let mut best = 0;
        for i in self.ancestors(b) {
            if on_a_path[i] {
                best = best.max(self.depth[i]);
            }
        }
        best
    }

    /// Similarity of `skill` to the reference competence.
    ///
    /// `2*N3 / (N1 + N2)` with the `other` label pinned to 0. The reference
    /// itself scores exactly 1 (its common ancestor with itself is itself).
    pub fn similarity_to_reference(&self, skill: &str) -> Result<SimilarityScore, TaxonomyError> {
        let i = self.resolve(skill)?;
        if self.labels[i] == OTHER_SKILL {
            return Ok(SimilarityScore(0.0));
        }
        let r = self.resolve(REFERENCE_SKILL)?;
        let n1 = self.depth[r] as f64;
        let n2 = self.depth[i] as f64;
        let n3 = self.common_ancestor_depth(i, r) as f64;
        Ok(SimilarityScore(2.0 * n3 / (n1 + n2)))
    }
}

/// Built-in config in the external edge-list format.
pub const DEFAULT_TAXONOMY_CONFIG: &str = "\
root\t-
health\troot
other\troot
medicine\thealth
nursing\thealth
doctor\tmedicine
nurse\tnursing
practitioner\tnursing
caregiver\tpractitioner
police_officer\tpractitioner
firefighter\tpractitioner
life_saving\tpractitioner
";

/// Convenience constructor mirroring the built-in tree.
pub fn build_default_taxonomy() -> SkillTaxonomy {
    SkillTaxonomy::healthcare_default()
}
