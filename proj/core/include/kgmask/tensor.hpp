#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace kgmask {

// Dense row-major matrix of doubles. The trainer is 64-bit real arithmetic
// throughout; everything stays small enough that a flat vector is the right
// representation.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double& operator()(int i, int j) {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return a[static_cast<size_t>(i) * static_cast<size_t>(cols) + static_cast<size_t>(j)];
    }
    double operator()(int i, int j) const {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return a[static_cast<size_t>(i) * static_cast<size_t>(cols) + static_cast<size_t>(j)];
    }

    double* row(int i) { return a.data() + static_cast<size_t>(i) * static_cast<size_t>(cols); }
    const double* row(int i) const {
        return a.data() + static_cast<size_t>(i) * static_cast<size_t>(cols);
    }

    void zero() { a.assign(a.size(), 0.0); }
    size_t size() const { return a.size(); }
};

using Vec = std::vector<double>;

// out(n x p) = x(n x m) * w(m x p)
void matmul(const Mat& x, const Mat& w, Mat& out);
// out(n x p) += x(n x m) * w(m x p)
void matmul_acc(const Mat& x, const Mat& w, Mat& out);
// out(n x m) += d(n x p) * w(m x p)^T   (gradient w.r.t. the left operand)
void matmul_bt_acc(const Mat& d, const Mat& w, Mat& out);
// out(m x p) += x(n x m)^T * d(n x p)   (gradient w.r.t. the right operand)
void matmul_at_acc(const Mat& x, const Mat& d, Mat& out);

} // namespace kgmask
