#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vwapx::nn {

// Dense row-major matrix of doubles. Vectors are 1xN rows, scalars 1x1.
class Tensor {
public:
    Tensor() = default;

    Tensor(int64_t rows, int64_t cols, double fill = 0.0) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative dimension");
        data_.assign(static_cast<size_t>(rows * cols), fill);
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor row(const std::vector<double>& v) {
        Tensor t(1, static_cast<int64_t>(v.size()));
        t.data_ = v;
        return t;
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const int64_t r = static_cast<int64_t>(rows.size());
        const int64_t c = r > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
        Tensor t(r, c);
        int64_t i = 0;
        for (const auto& row : rows) {
            if (static_cast<int64_t>(row.size()) != c)
                throw std::invalid_argument("Tensor::from_rows: ragged rows");
            int64_t j = 0;
            for (double v : row) t.at(i, j++) = v;
            ++i;
        }
        return t;
    }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    int64_t size() const { return rows_ * cols_; }
    bool empty() const { return data_.empty(); }
    std::vector<int64_t> shape() const { return {rows_, cols_}; }

    double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols_ + c)]; }
    double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols_ + c)]; }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    // Value of a 1x1 tensor.
    double item() const {
        if (size() != 1) throw std::logic_error("Tensor::item: not a scalar");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
    }

private:
    int64_t rows_ = 0;
    int64_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace vwapx::nn
