use crate::error::{Error, Result};
use crate::geometry::Patch;

/// One appearance of a cloud point inside a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub patch: u32,
    pub slot: u32,
}

/// CSR map from cloud point id to its occurrences across all patches.
/// Entries in a row are ordered by ascending patch id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseIndexMatrix {
    row_offsets: Vec<usize>,
    entries: Vec<Occurrence>,
}

impl SparseIndexMatrix {
    pub fn build(patches: &[Patch], n: usize) -> Result<Self> {
        Self::from_members(patches.iter().map(|p| p.member_ids.as_slice()), n)
    }

    /// One counting pass, a prefix sum, then one scatter pass.
    pub fn from_members<'a>(
        members: impl Iterator<Item = &'a [usize]> + Clone,
        n: usize,
    ) -> Result<Self> {
        let mut row_offsets = vec![0usize; n + 1];
        for ids in members.clone() {
            for &id in ids {
                if id >= n {
                    return Err(Error::IdOutOfRange { id, n });
                }
                row_offsets[id + 1] += 1;
            }
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let total = row_offsets[n];
        let mut cursor = row_offsets[..n].to_vec();
        let mut entries = vec![Occurrence { patch: 0, slot: 0 }; total];
        for (patch, ids) in members.enumerate() {
            for (slot, &id) in ids.iter().enumerate() {
                entries[cursor[id]] = Occurrence {
                    patch: patch as u32,
                    slot: slot as u32,
                };
                cursor[id] += 1;
            }
        }
        Ok(Self {
            row_offsets,
            entries,
        })
    }

    /// Number of cloud points (rows).
    pub fn rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> &[Occurrence] {
        &self.entries[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// `m_i`, the number of candidates at point `i`.
    pub fn candidate_count(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn total_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn entries(&self) -> &[Occurrence] {
        &self.entries
    }

    pub fn uncovered(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&i| self.candidate_count(i) == 0)
            .collect()
    }

    /// Largest `m_i` over the cloud.
    pub fn max_overlap(&self) -> usize {
        (0..self.rows())
            .map(|i| self.candidate_count(i))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(members: &[Vec<usize>], n: usize) -> Result<SparseIndexMatrix> {
        SparseIndexMatrix::from_members(members.iter().map(|m| m.as_slice()), n)
    }

    #[test]
    fn single_patch() {
        let idx = build(&[vec![0, 1, 2]], 4).unwrap();
        assert_eq!(idx.row_offsets(), &[0, 1, 2, 3, 3]);
        assert_eq!(idx.row(1), &[Occurrence { patch: 0, slot: 1 }]);
        assert_eq!(idx.uncovered(), vec![3]);
    }

    #[test]
    fn identical_patches_double_rows() {
        let idx = build(&[vec![2, 0, 1], vec![2, 0, 1]], 3).unwrap();
        for i in 0..3 {
            assert_eq!(idx.candidate_count(i), 2);
            assert_eq!(idx.row(i)[0].patch, 0);
            assert_eq!(idx.row(i)[1].patch, 1);
        }
        assert_eq!(idx.row(2)[0].slot, 0);
        assert_eq!(idx.total_entries(), 6);
        assert_eq!(idx.max_overlap(), 2);
    }

    #[test]
    fn out_of_range_id() {
        assert!(matches!(
            build(&[vec![0, 5]], 5),
            Err(Error::IdOutOfRange { id: 5, n: 5 })
        ));
    }
}
