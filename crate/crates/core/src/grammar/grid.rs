use super::tree::TableTree;
use super::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridWarning {
    /// Row `row` has `width` occupied columns out of `cols`.
    RaggedRow { row: usize, width: usize },
    /// A rowspan reaches past the last `<tr>`; the grid was extended.
    RowspanOverflow { cell: usize },
}

/// Row-by-column occupancy of a table after span expansion.
///
/// `occupancy[r * cols + c]` holds the index (document order) of the cell
/// covering that position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridTable {
    pub rows: usize,
    pub cols: usize,
    pub occupancy: Vec<Option<usize>>,
    pub n_cells: usize,
    pub warnings: Vec<GridWarning>,
}

impl GridTable {
    pub fn at(&self, row: usize, col: usize) -> Option<usize> {
        self.occupancy[row * self.cols + col]
    }

    pub fn is_ragged(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, GridWarning::RaggedRow { .. }))
    }
}

/// Places every cell on a grid following HTML table layout: each cell takes
/// the leftmost free column in its row and covers a `rowspan x colspan`
/// rectangle.
pub fn expand_grid(tree: &TableTree) -> Result<GridTable, GridError> {
    // Sparse occupancy, grown on demand: rows of column slots.
    let mut grid: Vec<Vec<Option<usize>>> = Vec::new();
    let n_rows = tree.rows().count();
    let mut warnings = Vec::new();
    let mut cell_id = 0;

    for (r, row) in tree.rows().enumerate() {
        let mut col = 0;
        for cell in &row.cells {
            let slot = |grid: &Vec<Vec<Option<usize>>>, rr: usize, cc: usize| {
                grid.get(rr).and_then(|g| g.get(cc)).copied().flatten()
            };
            while slot(&grid, r, col).is_some() {
                col += 1;
            }
            if r + cell.rows() > n_rows {
                warnings.push(GridWarning::RowspanOverflow { cell: cell_id });
            }
            for rr in r..r + cell.rows() {
                for cc in col..col + cell.cols() {
                    if let Some(other) = slot(&grid, rr, cc) {
                        return Err(GridError::SpanOverlap {
                            row: rr,
                            col: cc,
                            first: other,
                            second: cell_id,
                        });
                    }
                    if grid.len() <= rr {
                        grid.resize(rr + 1, Vec::new());
                    }
                    if grid[rr].len() <= cc {
                        grid[rr].resize(cc + 1, None);
                    }
                    grid[rr][cc] = Some(cell_id);
                }
            }
            col += cell.cols();
            cell_id += 1;
        }
    }

    let rows = grid.len().max(n_rows);
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let mut occupancy = vec![None; rows * cols];
    for (r, line) in grid.iter().enumerate() {
        for (c, v) in line.iter().enumerate() {
            occupancy[r * cols + c] = *v;
        }
    }
    for r in 0..rows {
        let width = (0..cols).filter(|&c| occupancy[r * cols + c].is_some()).count();
        if width != cols {
            warnings.push(GridWarning::RaggedRow { row: r, width });
        }
    }
    if !warnings.is_empty() {
        log::debug!("grid expansion warnings: {warnings:?}");
    }

    Ok(GridTable {
        rows,
        cols,
        occupancy,
        n_cells: cell_id,
        warnings,
    })
}
