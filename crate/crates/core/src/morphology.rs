//! Binary 2D mask operations: connected components, hole filling,
//! disk-element morphology and Moore-neighbour contour tracing.
//!
//! Masks are row-major `&[bool]` of `width × height`. Foreground uses
//! 8-connectivity and background 4-connectivity, so a hole is any
//! background region not 4-connected to the image border.

use std::collections::VecDeque;

const NEIGHBORS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Component label per pixel (`0` for background, `1..` for components in
/// raster order of their first pixel) and each component's area.
pub fn components_8(mask: &[bool], width: usize, height: usize) -> (Vec<u32>, Vec<usize>) {
    assert_eq!(mask.len(), width * height);
    let mut labels = vec![0u32; mask.len()];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        let id = areas.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if mask[j] && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// The largest 8-connected component; ties go to the component met first
/// in raster order. `None` for an empty mask.
pub fn largest_component(mask: &[bool], width: usize, height: usize) -> Option<Vec<bool>> {
    let (labels, areas) = components_8(mask, width, height);
    let (best, _) = areas
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, usize)>, (i, &a)| match acc {
            Some((_, best_area)) if best_area >= a => acc,
            _ => Some((i, a)),
        })?;
    let id = best as u32 + 1;
    Some(labels.iter().map(|&l| l == id).collect())
}

/// Fills every background region that is not 4-connected to the border.
pub fn fill_holes(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut outside = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        let i = y * width + x;
        if !mask[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    };
    for x in 0..width {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, height - 1, &mut outside, &mut queue);
    }
    for y in 0..height {
        seed(0, y, &mut outside, &mut queue);
        seed(width - 1, y, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let mut visit = |j: usize| {
            if !mask[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < width {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - width);
        }
        if y + 1 < height {
            visit(i + width);
        }
    }
    outside.iter().map(|&o| !o).collect()
}

fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Dilation by a disk; pixels outside the image count as background.
pub fn dilate(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let offsets = disk_offsets(radius);
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            if !mask[y * width + x] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && nx < width as isize && ny < height as isize {
                    out[ny as usize * width + nx as usize] = true;
                }
            }
        }
    }
    out
}

/// Erosion by a disk; pixels outside the image count as foreground so that
/// closing stays extensive at the border.
pub fn erode(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let offsets = disk_offsets(radius);
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = offsets.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx < 0
                    || ny < 0
                    || nx >= width as isize
                    || ny >= height as isize
                    || mask[ny as usize * width + nx as usize]
            });
        }
    }
    out
}

pub fn close(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    erode(&dilate(mask, width, height, radius), width, height, radius)
}

// Clockwise with y pointing down: W, NW, N, NE, E, SE, S, SW.
const MOORE: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Moore-neighbour boundary trace of the component containing the first
/// foreground pixel in raster order. The returned loop is closed implicitly
/// (the last pixel is adjacent to the first). Empty mask gives an empty list.
pub fn trace_contour(mask: &[bool], width: usize, height: usize) -> Vec<[usize; 2]> {
    let Some(start_idx) = mask.iter().position(|&m| m) else {
        return Vec::new();
    };
    let fg = |x: isize, y: isize| {
        x >= 0 && y >= 0 && x < width as isize && y < height as isize && mask[y as usize * width + x as usize]
    };
    let start = ((start_idx % width) as isize, (start_idx / width) as isize);
    // Raster order guarantees the west neighbour of the start is background.
    let mut current = start;
    let mut backtrack = (start.0 - 1, start.1);
    let mut contour = Vec::new();
    let mut first_move: Option<(isize, isize)> = None;
    let limit = 4 * mask.len() + 8;
    for _ in 0..limit {
        let back_dir = MOORE
            .iter()
            .position(|&(dx, dy)| (current.0 + dx, current.1 + dy) == backtrack)
            .expect("backtrack is a neighbour");
        let mut next = None;
        let mut prev = backtrack;
        for step in 1..=8 {
            let (dx, dy) = MOORE[(back_dir + step) % 8];
            let cand = (current.0 + dx, current.1 + dy);
            if fg(cand.0, cand.1) {
                next = Some((cand, prev));
                break;
            }
            prev = cand;
        }
        let Some((next, new_back)) = next else {
            // isolated pixel
            return vec![[start.0 as usize, start.1 as usize]];
        };
        if current == start {
            match first_move {
                None => first_move = Some(next),
                Some(m) if m == next => return contour,
                Some(_) => {}
            }
        }
        contour.push([current.0 as usize, current.1 as usize]);
        current = next;
        backtrack = new_back;
    }
    contour
}

/// Length of the closed contour: unit axial steps and `√2` diagonal steps.
pub fn contour_length(contour: &[[usize; 2]]) -> f64 {
    if contour.len() < 2 {
        return 0.0;
    }
    let mut len = 0.0;
    for i in 0..contour.len() {
        let a = contour[i];
        let b = contour[(i + 1) % contour.len()];
        let diagonal = a[0] != b[0] && a[1] != b[1];
        len += if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
    }
    len
}
