#include "kgmask/tensor.hpp"

namespace kgmask {

void matmul(const Mat& x, const Mat& w, Mat& out) {
    assert(x.cols == w.rows);
    out = Mat(x.rows, w.cols);
    matmul_acc(x, w, out);
}

void matmul_acc(const Mat& x, const Mat& w, Mat& out) {
    assert(x.cols == w.rows && out.rows == x.rows && out.cols == w.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* oi = out.row(i);
        for (int k = 0; k < x.cols; ++k) {
            const double v = xi[k];
            if (v == 0.0) continue;
            const double* wk = w.row(k);
            for (int j = 0; j < w.cols; ++j) oi[j] += v * wk[j];
        }
    }
}

void matmul_bt_acc(const Mat& d, const Mat& w, Mat& out) {
    assert(d.cols == w.cols && out.rows == d.rows && out.cols == w.rows);
    for (int i = 0; i < d.rows; ++i) {
        const double* di = d.row(i);
        double* oi = out.row(i);
        for (int k = 0; k < w.rows; ++k) {
            const double* wk = w.row(k);
            double acc = 0.0;
            for (int j = 0; j < w.cols; ++j) acc += di[j] * wk[j];
            oi[k] += acc;
        }
    }
}

void matmul_at_acc(const Mat& x, const Mat& d, Mat& out) {
    assert(x.rows == d.rows && out.rows == x.cols && out.cols == d.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        const double* di = d.row(i);
        for (int k = 0; k < x.cols; ++k) {
            const double v = xi[k];
            if (v == 0.0) continue;
            double* ok = out.row(k);
            for (int j = 0; j < d.cols; ++j) ok[j] += v * di[j];
        }
    }
}

} // namespace kgmask
