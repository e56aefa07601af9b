//! Binary morphology on spectrogram masks.
//!
//! Masks are `Array2<bool>` with the same shape as the spectrogram power
//! matrix: rows index time frames, columns index frequency bins.
//!
//! Conventions, chosen so that erosion and dilation are exact duals for
//! symmetric structuring elements (`erode(m) == !dilate(!m)`):
//!
//! * dilation treats pixels outside the image as background (0),
//! * erosion treats pixels outside the image as foreground (1), i.e. the
//!   image border is not eroded,
//! * connectivity is 8-connected throughout (components, hole filling).

use ndarray::Array2;

/// Binary image mask.
pub type Mask = Array2<bool>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    /// Full rectangle, extents in (rows, cols).
    Rect(usize, usize),
    /// Diamond (L1 ball), radii in (rows, cols).
    Diamond(usize, usize),
    Generic,
}

/// A structuring element: a set of (row, col) offsets around the origin.
#[derive(Debug, Clone)]
pub struct Selem {
    offsets: Vec<(isize, isize)>,
    shape: Shape,
}

impl Selem {
    /// Rectangle of `rows x cols` pixels. For even extents the origin sits
    /// right of / below the center: extent `k` covers offsets
    /// `-floor(k/2) ..= k-1-floor(k/2)`.
    pub fn rect(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "rect extents must be positive");
        let (rlo, rhi) = extent_range(rows);
        let (clo, chi) = extent_range(cols);
        let mut offsets = Vec::with_capacity(rows * cols);
        for r in rlo..=rhi {
            for c in clo..=chi {
                offsets.push((r, c));
            }
        }
        Selem {
            offsets,
            shape: Shape::Rect(rows, cols),
        }
    }

    /// Diamond with the given radii: offsets `(r, c)` with
    /// `|r|/r_rows + |c|/r_cols <= 1`. A zero radius collapses that axis, so
    /// `diamond(a, 0)` is a vertical segment and `diamond(0, 0)` the
    /// identity.
    pub fn diamond(r_rows: usize, r_cols: usize) -> Self {
        let mut offsets = Vec::new();
        let (a, b) = (r_rows as isize, r_cols as isize);
        for r in -a..=a {
            for c in -b..=b {
                let inside = match (a, b) {
                    (0, 0) => r == 0 && c == 0,
                    (0, _) => r == 0 && c.abs() <= b,
                    (_, 0) => c == 0 && r.abs() <= a,
                    _ => r.abs() * b + c.abs() * a <= a * b,
                };
                if inside {
                    offsets.push((r, c));
                }
            }
        }
        Selem {
            offsets,
            shape: Shape::Diamond(r_rows, r_cols),
        }
    }

    /// Arbitrary element from explicit offsets.
    pub fn from_offsets(offsets: Vec<(isize, isize)>) -> Self {
        assert!(!offsets.is_empty(), "structuring element must be non-empty");
        Selem {
            offsets,
            shape: Shape::Generic,
        }
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    /// True if the element equals its point reflection through the origin.
    pub fn is_symmetric(&self) -> bool {
        self.offsets
            .iter()
            .all(|&(r, c)| self.offsets.contains(&(-r, -c)))
    }
}

fn extent_range(k: usize) -> (isize, isize) {
    let lo = -((k / 2) as isize);
    (lo, k as isize - 1 + lo)
}

/// Morphological dilation (pixels outside the image count as background).
pub fn dilate(mask: &Mask, se: &Selem) -> Mask {
    match se.shape {
        Shape::Rect(rows, cols) => {
            let (rlo, rhi) = extent_range(rows);
            let (clo, chi) = extent_range(cols);
            let tmp = dilate_segment_rows(mask, rlo, rhi);
            dilate_segment_cols(&tmp, clo, chi)
        }
        Shape::Diamond(a, b) if a == b && a > 0 => {
            let mut out = mask.clone();
            for _ in 0..a {
                out = dilate_unit_cross(&out);
            }
            out
        }
        Shape::Diamond(a, 0) => dilate_segment_rows(mask, -(a as isize), a as isize),
        Shape::Diamond(0, b) => dilate_segment_cols(mask, -(b as isize), b as isize),
        _ => dilate_generic(mask, se),
    }
}

/// Morphological erosion (pixels outside the image count as foreground, so
/// the border is never eroded by the element sticking out).
pub fn erode(mask: &Mask, se: &Selem) -> Mask {
    match se.shape {
        Shape::Rect(rows, cols) => {
            let (rlo, rhi) = extent_range(rows);
            let (clo, chi) = extent_range(cols);
            let tmp = erode_segment_rows(mask, rlo, rhi);
            erode_segment_cols(&tmp, clo, chi)
        }
        Shape::Diamond(a, b) if a == b && a > 0 => {
            let mut out = mask.clone();
            for _ in 0..a {
                out = erode_unit_cross(&out);
            }
            out
        }
        Shape::Diamond(a, 0) => erode_segment_rows(mask, -(a as isize), a as isize),
        Shape::Diamond(0, b) => erode_segment_cols(mask, -(b as isize), b as isize),
        _ => erode_generic(mask, se),
    }
}

fn dilate_generic(mask: &Mask, se: &Selem) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    for r in 0..nr {
        for c in 0..nc {
            if mask[[r, c]] {
                for &(dr, dc) in &se.offsets {
                    let rr = r as isize + dr;
                    let cc = c as isize + dc;
                    if rr >= 0 && rr < nr as isize && cc >= 0 && cc < nc as isize {
                        out[[rr as usize, cc as usize]] = true;
                    }
                }
            }
        }
    }
    out
}

fn erode_generic(mask: &Mask, se: &Selem) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    for r in 0..nr {
        'px: for c in 0..nc {
            for &(dr, dc) in &se.offsets {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr >= 0 && rr < nr as isize && cc >= 0 && cc < nc as isize {
                    if !mask[[rr as usize, cc as usize]] {
                        continue 'px;
                    }
                }
            }
            out[[r, c]] = true;
        }
    }
    out
}

/// Dilate each column by a vertical segment of offsets `lo..=hi`.
fn dilate_segment_rows(mask: &Mask, lo: isize, hi: isize) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    // Sweep rows; a set pixel at row r covers output rows r+lo ..= r+hi.
    let mut cover = vec![0i32; nc];
    let mut starts: Vec<Vec<u32>> = vec![Vec::new(); nr];
    let mut ends: Vec<Vec<u32>> = vec![Vec::new(); nr + 1];
    for r in 0..nr {
        for c in 0..nc {
            if mask[[r, c]] {
                let s = (r as isize + lo).max(0);
                let e = (r as isize + hi).min(nr as isize - 1);
                if s <= e {
                    starts[s as usize].push(c as u32);
                    ends[e as usize + 1].push(c as u32);
                }
            }
        }
    }
    for r in 0..nr {
        for &c in &starts[r] {
            cover[c as usize] += 1;
        }
        for &c in &ends[r] {
            cover[c as usize] -= 1;
        }
        for c in 0..nc {
            if cover[c] > 0 {
                out[[r, c]] = true;
            }
        }
    }
    out
}

/// Dilate each row by a horizontal segment of offsets `lo..=hi`.
fn dilate_segment_cols(mask: &Mask, lo: isize, hi: isize) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    let mut diff = vec![0i32; nc + 1];
    for r in 0..nr {
        diff.iter_mut().for_each(|d| *d = 0);
        for c in 0..nc {
            if mask[[r, c]] {
                let s = (c as isize + lo).max(0) as usize;
                let e = (c as isize + hi).min(nc as isize - 1);
                if s as isize <= e {
                    diff[s] += 1;
                    diff[e as usize + 1] -= 1;
                }
            }
        }
        let mut acc = 0;
        for c in 0..nc {
            acc += diff[c];
            if acc > 0 {
                out[[r, c]] = true;
            }
        }
    }
    out
}

/// Erode each column by a vertical segment of offsets `lo..=hi`
/// (out-of-image treated as foreground).
fn erode_segment_rows(mask: &Mask, lo: isize, hi: isize) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    for c in 0..nc {
        let mut r = 0;
        while r < nr {
            if !mask[[r, c]] {
                r += 1;
                continue;
            }
            let run_start = r;
            while r < nr && mask[[r, c]] {
                r += 1;
            }
            let run_end = r - 1;
            // Runs touching the border extend virtually to infinity.
            let s = if run_start == 0 {
                isize::MIN / 2
            } else {
                run_start as isize
            };
            let e = if run_end == nr - 1 {
                isize::MAX / 2
            } else {
                run_end as isize
            };
            let from = (s - lo).max(0);
            let to = (e - hi).min(nr as isize - 1);
            for p in from..=to {
                out[[p as usize, c]] = true;
            }
        }
    }
    out
}

/// Erode each row by a horizontal segment of offsets `lo..=hi`.
fn erode_segment_cols(mask: &Mask, lo: isize, hi: isize) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = Mask::from_elem((nr, nc), false);
    for r in 0..nr {
        let mut c = 0;
        while c < nc {
            if !mask[[r, c]] {
                c += 1;
                continue;
            }
            let run_start = c;
            while c < nc && mask[[r, c]] {
                c += 1;
            }
            let run_end = c - 1;
            let s = if run_start == 0 {
                isize::MIN / 2
            } else {
                run_start as isize
            };
            let e = if run_end == nc - 1 {
                isize::MAX / 2
            } else {
                run_end as isize
            };
            let from = (s - lo).max(0);
            let to = (e - hi).min(nc as isize - 1);
            for p in from..=to {
                out[[r, p as usize]] = true;
            }
        }
    }
    out
}

fn dilate_unit_cross(mask: &Mask) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = mask.clone();
    for r in 0..nr {
        for c in 0..nc {
            if mask[[r, c]] {
                if r > 0 {
                    out[[r - 1, c]] = true;
                }
                if r + 1 < nr {
                    out[[r + 1, c]] = true;
                }
                if c > 0 {
                    out[[r, c - 1]] = true;
                }
                if c + 1 < nc {
                    out[[r, c + 1]] = true;
                }
            }
        }
    }
    out
}

fn erode_unit_cross(mask: &Mask) -> Mask {
    let (nr, nc) = mask.dim();
    let mut out = mask.clone();
    for r in 0..nr {
        for c in 0..nc {
            if mask[[r, c]] {
                let keep = (r == 0 || mask[[r - 1, c]])
                    && (r + 1 == nr || mask[[r + 1, c]])
                    && (c == 0 || mask[[r, c - 1]])
                    && (c + 1 == nc || mask[[r, c + 1]]);
                out[[r, c]] = keep;
            }
        }
    }
    out
}

/// Fill background regions not connected to the image border
/// (8-connectivity).
pub fn fill_holes(mask: &Mask) -> Mask {
    let (nr, nc) = mask.dim();
    if nr == 0 || nc == 0 {
        return mask.clone();
    }
    let mut outside = Mask::from_elem((nr, nc), false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let push = |stack: &mut Vec<(usize, usize)>, outside: &mut Mask, r: usize, c: usize| {
        if !mask[[r, c]] && !outside[[r, c]] {
            outside[[r, c]] = true;
            stack.push((r, c));
        }
    };
    for c in 0..nc {
        push(&mut stack, &mut outside, 0, c);
        push(&mut stack, &mut outside, nr - 1, c);
    }
    for r in 0..nr {
        push(&mut stack, &mut outside, r, 0);
        push(&mut stack, &mut outside, r, nc - 1);
    }
    while let Some((r, c)) = stack.pop() {
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr >= 0 && rr < nr as isize && cc >= 0 && cc < nc as isize {
                    push(&mut stack, &mut outside, rr as usize, cc as usize);
                }
            }
        }
    }
    let mut out = mask.clone();
    for r in 0..nr {
        for c in 0..nc {
            if !outside[[r, c]] {
                out[[r, c]] = true;
            }
        }
    }
    out
}

/// Label 8-connected foreground components. Label 0 is background; component
/// `l` has `sizes[l - 1]` pixels.
pub fn label_components(mask: &Mask) -> (Array2<u32>, Vec<usize>) {
    let (nr, nc) = mask.dim();
    let mut labels = Array2::<u32>::zeros((nr, nc));
    let mut sizes = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for r0 in 0..nr {
        for c0 in 0..nc {
            if !mask[[r0, c0]] || labels[[r0, c0]] != 0 {
                continue;
            }
            let label = sizes.len() as u32 + 1;
            let mut size = 0usize;
            labels[[r0, c0]] = label;
            stack.push((r0, c0));
            while let Some((r, c)) = stack.pop() {
                size += 1;
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let rr = r as isize + dr;
                        let cc = c as isize + dc;
                        if rr >= 0 && rr < nr as isize && cc >= 0 && cc < nc as isize {
                            let (rr, cc) = (rr as usize, cc as usize);
                            if mask[[rr, cc]] && labels[[rr, cc]] == 0 {
                                labels[[rr, cc]] = label;
                                stack.push((rr, cc));
                            }
                        }
                    }
                }
            }
            sizes.push(size);
        }
    }
    (labels, sizes)
}

/// Remove 8-connected components smaller than `min_px` pixels.
pub fn remove_small_components(mask: &Mask, min_px: usize) -> Mask {
    if min_px <= 1 {
        return mask.clone();
    }
    let (labels, sizes) = label_components(mask);
    let mut out = mask.clone();
    for ((r, c), &l) in labels.indexed_iter() {
        if l != 0 && sizes[l as usize - 1] < min_px {
            out[[r, c]] = false;
        }
    }
    out
}
