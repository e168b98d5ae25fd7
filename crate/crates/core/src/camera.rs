//! Pinhole cameras: world->camera rigid transform followed by perspective
//! division and intrinsics. Camera frame is x right, y down, z forward.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::grid::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vec3,
    height: u32,
    width: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z of the point.
    pub depth: f64,
    pub visible: bool,
}

impl Camera {
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vec3,
        height: u32,
        width: u32,
    ) -> Result<Self> {
        let should_be_identity = rotation.transpose() * rotation;
        if (should_be_identity - Matrix3::identity()).amax() > 1e-9 {
            return Err(Error::invalid("camera.rotation", "not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("camera.rotation", "determinant is not +1"));
        }
        let (fx, fy) = (intrinsics[(0, 0)], intrinsics[(1, 1)]);
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("camera.intrinsics", "focal lengths must be positive"));
        }
        let (cx, cy) = (intrinsics[(0, 2)], intrinsics[(1, 2)]);
        if height == 0 || width == 0 {
            return Err(Error::invalid("camera.image_size", "zero-sized image"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::invalid(
                "camera.intrinsics",
                format!("principal point ({cx}, {cy}) outside {width}x{height} image"),
            ));
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("camera.translation", "non-finite"));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
            height,
            width,
        })
    }

    /// Camera at `center` looking along heading `yaw` (radians from +x toward
    /// +y) tilted up by `pitch`, square pixels, horizontal field of view `fov`.
    pub fn looking(center: Vec3, yaw: f64, pitch: f64, fov: f64, height: u32, width: u32) -> Self {
        let forward = Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
        let right = Vec3::new(yaw.sin(), -yaw.cos(), 0.0);
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let f = 0.5 * width as f64 / (0.5 * fov).tan();
        let intrinsics = Matrix3::new(
            f,
            0.0,
            0.5 * width as f64,
            0.0,
            f,
            0.5 * height as f64,
            0.0,
            0.0,
            1.0,
        );
        let translation = -(rotation * center);
        Self::new(intrinsics, rotation, translation, height, width)
            .expect("look-at construction yields a valid camera")
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera_frame(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        self.project_camera_frame(&self.to_camera_frame(p))
    }

    pub fn project_camera_frame(&self, pc: &Vec3) -> Projection {
        let depth = pc.z;
        if depth <= 0.0 {
            return Projection {
                u: f64::NAN,
                v: f64::NAN,
                depth,
                visible: false,
            };
        }
        let k = &self.intrinsics;
        let (x, y) = (pc.x / depth, pc.y / depth);
        let u = k[(0, 0)] * x + k[(0, 1)] * y + k[(0, 2)];
        let v = k[(1, 1)] * y + k[(1, 2)];
        let visible = u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64;
        Projection { u, v, depth, visible }
    }

    /// Unit world-frame direction of the ray through pixel `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        let y = (v - k[(1, 2)]) / k[(1, 1)];
        let x = (u - k[(0, 2)] - k[(0, 1)] * y) / k[(0, 0)];
        (self.rotation.transpose() * Vec3::new(x, y, 1.0)).normalize()
    }
}

/// Panoramic rig: `headings` evenly spaced yaws times the given pitches.
pub fn panorama_rig(center: Vec3, headings: usize, pitches: &[f64], fov: f64, size: (u32, u32)) -> Vec<Camera> {
    let mut rig = Vec::with_capacity(headings * pitches.len());
    for &pitch in pitches {
        for h in 0..headings {
            let yaw = std::f64::consts::TAU * h as f64 / headings as f64;
            rig.push(Camera::looking(center, yaw, pitch, fov, size.0, size.1));
        }
    }
    rig
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(fx: f64, cx: f64, cy: f64) -> Camera {
        let k = Matrix3::new(fx, 0.0, cx, 0.0, fx, cy, 0.0, 0.0, 1.0);
        Camera::new(k, Matrix3::identity(), Vec3::zeros(), 100, 100).unwrap()
    }

    #[test]
    fn principal_point_on_axis() {
        let cam = simple(80.0, 50.0, 40.0);
        let p = cam.project(&Vec3::new(0.0, 0.0, 1.0));
        assert!(p.visible);
        assert_eq!((p.u, p.v), (50.0, 40.0));
    }

    #[test]
    fn behind_camera_invisible() {
        let cam = simple(80.0, 50.0, 40.0);
        assert!(!cam.project(&Vec3::new(0.0, 0.0, -1.0)).visible);
        assert!(!cam.project(&Vec3::new(0.0, 0.0, 0.0)).visible);
    }

    #[test]
    fn hand_perspective() {
        let cam = simple(100.0, 50.0, 50.0);
        let p = cam.project(&Vec3::new(0.5, 0.0, 2.0));
        assert!((p.u - 75.0).abs() < 1e-12);
        assert!(p.visible);
        assert!(!cam.project(&Vec3::new(2.0, 0.0, 1.0)).visible);
    }

    #[test]
    fn lateral_scaling_is_linear() {
        let cam = simple(100.0, 50.0, 50.0);
        let a = cam.project(&Vec3::new(0.1, -0.05, 2.0));
        let b = cam.project(&Vec3::new(0.2, -0.1, 2.0));
        assert!(((b.u - 50.0) - 2.0 * (a.u - 50.0)).abs() < 1e-12);
        assert!(((b.v - 50.0) - 2.0 * (a.v - 50.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rotation_and_intrinsics() {
        let k = Matrix3::new(10.0, 0.0, 5.0, 0.0, 10.0, 5.0, 0.0, 0.0, 1.0);
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(Camera::new(k, r, Vec3::zeros(), 10, 10).is_err());
        let bad_k = Matrix3::new(10.0, 0.0, 15.0, 0.0, 10.0, 5.0, 0.0, 0.0, 1.0);
        assert!(Camera::new(bad_k, Matrix3::identity(), Vec3::zeros(), 10, 10).is_err());
    }

    #[test]
    fn looking_camera_sees_forward_point() {
        let c = Vec3::new(1.0, 2.0, 1.5);
        let cam = Camera::looking(c, std::f64::consts::FRAC_PI_2, 0.0, 1.2, 32, 32);
        let p = cam.project(&(c + Vec3::new(0.0, 3.0, 0.0)));
        assert!(p.visible);
        assert!((p.u - 16.0).abs() < 1e-9 && (p.v - 16.0).abs() < 1e-9);
        assert!((cam.center() - c).norm() < 1e-12);
        // point above the camera projects into the upper half of the image
        assert!(cam.project(&(c + Vec3::new(0.0, 3.0, 0.5))).v < 16.0);
        let ray = cam.pixel_ray(16.0, 16.0);
        assert!((ray - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }
}
