//! Connected component labelling over role-set pixels of a label mask.

use std::collections::BTreeSet;

use crate::indicators::IndicatorConfig;
use crate::mask::LabelMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    /// Count of pixel edges adjacent to a non-role pixel or the image border.
    pub perimeter: usize,
    /// (min_x, min_y, max_x, max_y), inclusive.
    pub bbox: (u32, u32, u32, u32),
}

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Maximal connected regions of role-set pixels under `cfg.connectivity`.
/// Components smaller than `cfg.min_component_px` are discarded. Perimeter
/// always counts 4-neighbour boundary edges regardless of connectivity.
pub fn connected_components(
    mask: &LabelMask,
    roles: &BTreeSet<u8>,
    cfg: &IndicatorConfig,
) -> Vec<Component> {
    let w = mask.width as usize;
    let h = mask.height as usize;
    let in_role: Vec<bool> = mask.data.iter().map(|id| roles.contains(id)).collect();
    let mut visited = vec![false; w * h];
    let neighbours: &[(i64, i64)] = if cfg.connectivity == 8 { &N8 } else { &N4 };

    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !in_role[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut area = 0usize;
        let mut perimeter = 0usize;
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0u32, 0u32);
        while let Some(idx) = stack.pop() {
            let x = (idx % w) as i64;
            let y = (idx / w) as i64;
            area += 1;
            min_x = min_x.min(x as u32);
            max_x = max_x.max(x as u32);
            min_y = min_y.min(y as u32);
            max_y = max_y.max(y as u32);
            // boundary edges: always the 4-neighbourhood
            for (dx, dy) in N4 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    perimeter += 1;
                } else if !in_role[ny as usize * w + nx as usize] {
                    perimeter += 1;
                }
            }
            for &(dx, dy) in neighbours {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if in_role[nidx] && !visited[nidx] {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        if area >= cfg.min_component_px {
            components.push(Component {
                area,
                perimeter,
                bbox: (min_x, min_y, max_x, max_y),
            });
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategorySchema;

    fn mask_from_grid(grid: &[&[u8]]) -> LabelMask {
        let h = grid.len() as u32;
        let w = grid[0].len() as u32;
        let data: Vec<u8> = grid.iter().flat_map(|row| row.iter().copied()).collect();
        LabelMask::new(w, h, data, 0, "t", &CategorySchema::default()).unwrap()
    }

    fn cfg(connectivity: u8, min_px: usize) -> IndicatorConfig {
        IndicatorConfig {
            connectivity,
            min_component_px: min_px,
            ..IndicatorConfig::default()
        }
    }

    #[test]
    fn two_disjoint_blocks() {
        // two 3x3 blocks of class 5 on a class-0 background
        let mut data = vec![0u8; 10 * 10];
        for y in 0..3 {
            for x in 0..3 {
                data[y * 10 + x] = 5;
                data[(y + 6) * 10 + (x + 6)] = 5;
            }
        }
        let mask = LabelMask::new(10, 10, data, 0, "t", &CategorySchema::default()).unwrap();
        let roles: BTreeSet<u8> = [5u8].into_iter().collect();
        let comps = connected_components(&mask, &roles, &cfg(4, 1));
        assert_eq!(comps.len(), 2);
        for c in &comps {
            assert_eq!(c.area, 9);
            assert_eq!(c.perimeter, 12);
        }
    }

    #[test]
    fn single_block_perimeter() {
        let rows = [[2u8; 10]; 10];
        let grid: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let mask = mask_from_grid(&grid);
        let roles: BTreeSet<u8> = [2u8].into_iter().collect();
        let comps = connected_components(&mask, &roles, &cfg(4, 1));
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 100);
        assert_eq!(comps[0].perimeter, 40);
        assert_eq!(comps[0].bbox, (0, 0, 9, 9));
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let mask = mask_from_grid(&[&[5, 0], &[0, 5]]);
        let roles: BTreeSet<u8> = [5u8].into_iter().collect();
        assert_eq!(connected_components(&mask, &roles, &cfg(4, 1)).len(), 2);
        assert_eq!(connected_components(&mask, &roles, &cfg(8, 1)).len(), 1);
    }

    #[test]
    fn min_component_filter() {
        let mask = mask_from_grid(&[&[5, 0, 5], &[5, 0, 0], &[5, 0, 0]]);
        let roles: BTreeSet<u8> = [5u8].into_iter().collect();
        let comps = connected_components(&mask, &roles, &cfg(4, 2));
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 3);
    }
}
