//! Oriented-box overlap, clearance and IoU between two rotated boxes.
//!
//! `cargo run --example geometry_iou`

use armtest::geometry::{intersection_area, obb_corners, obb_distance, obb_intersect, obb_iou, ObbPose};

fn main() {
    let a = ObbPose::new(0.0, 0.0, 0.0, 2.0, 1.0);
    for (dx, rot) in [(0.0, 0.0), (0.0, 90.0), (0.5, 30.0), (1.5, 45.0), (3.0, 0.0)] {
        let b = ObbPose::new(dx, 0.0, rot, 2.0, 1.0);
        println!(
            "b at x={dx:.1} rot={rot:>4.0}: intersects={:<5} area={:.4} iou={:.4} gap={:.4}",
            obb_intersect(&a, &b),
            intersection_area(&a, &b),
            obb_iou(&a, &b),
            obb_distance(&a, &b),
        );
    }
    let corners = obb_corners(&ObbPose::new(0.7, 0.4, 30.0, 0.17, 0.14));
    println!("corners of a 0.17 x 0.14 box at 30 deg:");
    for [x, y] in corners {
        println!("  ({x:.4}, {y:.4})");
    }
}
