#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace lfk {

/// Small fixed-size 3D vector/matrix types used throughout the library.
/// All lengths are millimeters unless a function says otherwise.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    Vec3 operator-() const { return {-x, -y, -z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 0};
}

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    double& operator()(int r, int c) { return m[3 * r + c]; }
    double operator()(int r, int c) const { return m[3 * r + c]; }

    static Mat3 identity() {
        Mat3 I;
        I.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return I;
    }
    static Mat3 scaled_identity(double s) {
        Mat3 I;
        I.m = {s, 0, 0, 0, s, 0, 0, 0, s};
        return I;
    }
    /// s*I + t * f (x) f
    static Mat3 iso_plus_rank1(double s, double t, const Vec3& f) {
        Mat3 A = scaled_identity(s);
        const double fv[3] = {f.x, f.y, f.z};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) A(r, c) += t * fv[r] * fv[c];
        return A;
    }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Mat3 inverse() const {
        Mat3 inv;
        double d = det();
        inv(0, 0) = (m[4] * m[8] - m[5] * m[7]) / d;
        inv(0, 1) = (m[2] * m[7] - m[1] * m[8]) / d;
        inv(0, 2) = (m[1] * m[5] - m[2] * m[4]) / d;
        inv(1, 0) = (m[5] * m[6] - m[3] * m[8]) / d;
        inv(1, 1) = (m[0] * m[8] - m[2] * m[6]) / d;
        inv(1, 2) = (m[2] * m[3] - m[0] * m[5]) / d;
        inv(2, 0) = (m[3] * m[7] - m[4] * m[6]) / d;
        inv(2, 1) = (m[1] * m[6] - m[0] * m[7]) / d;
        inv(2, 2) = (m[0] * m[4] - m[1] * m[3]) / d;
        return inv;
    }

    /// Rotation about the x/y/z axis by angle (radians).
    static Mat3 rot_x(double a) {
        Mat3 R = identity();
        R(1, 1) = std::cos(a); R(1, 2) = -std::sin(a);
        R(2, 1) = std::sin(a); R(2, 2) = std::cos(a);
        return R;
    }
    static Mat3 rot_y(double a) {
        Mat3 R = identity();
        R(0, 0) = std::cos(a); R(0, 2) = std::sin(a);
        R(2, 0) = -std::sin(a); R(2, 2) = std::cos(a);
        return R;
    }
    static Mat3 rot_z(double a) {
        Mat3 R = identity();
        R(0, 0) = std::cos(a); R(0, 1) = -std::sin(a);
        R(1, 0) = std::sin(a); R(1, 1) = std::cos(a);
        return R;
    }
};

inline double quadform(const Mat3& A, const Vec3& u, const Vec3& v) { return dot(u, A * v); }

}  // namespace lfk
