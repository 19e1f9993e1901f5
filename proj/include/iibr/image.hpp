#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "iibr/error.hpp"

namespace iibr {

/// Linear RGB triple, channels in [0,1].
using Rgb = Eigen::Array3d;

inline double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

/// Dense row-major 2D container. Row index first: `at(y, x)`.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, const T& fill = T{})
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(checked(rows) * checked(cols)), fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool contains(int y, int x) const { return y >= 0 && y < rows_ && x >= 0 && x < cols_; }
    bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    T& at(int y, int x) { return data_[index(y, x)]; }
    const T& at(int y, int x) const { return data_[index(y, x)]; }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Grid& o) const
    {
        if (!same_shape(o))
            return false;
        for (size_t i = 0; i < data_.size(); ++i)
            if (!equal(data_[i], o.data_[i]))
                return false;
        return true;
    }

private:
    static long checked(int n)
    {
        if (n < 0)
            throw DomainError("grid dimension must be non-negative");
        return n;
    }
    size_t index(int y, int x) const { return static_cast<size_t>(y) * cols_ + x; }
    static bool equal(const T& a, const T& b)
    {
        if constexpr (std::is_same_v<T, Rgb>)
            return (a == b).all();
        else
            return a == b;
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using RgbImage = Grid<Rgb>;
using ScalarField = Grid<double>;
/// Boolean raster stored as bytes (0/1).
using Mask = Grid<std::uint8_t>;

inline int count_set(const Mask& m)
{
    return static_cast<int>(std::count_if(m.data().begin(), m.data().end(), [](auto b) { return b != 0; }));
}

/// Rounds every channel to the nearest multiple of 1/255, as an 8-bit store would.
inline RgbImage quantize8(const RgbImage& img)
{
    RgbImage out = img;
    for (auto& c : out.data())
        for (int k = 0; k < 3; ++k)
            c[k] = std::round(std::clamp(c[k], 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

inline ScalarField luma_of(const RgbImage& img)
{
    ScalarField out(img.rows(), img.cols());
    for (size_t i = 0; i < img.size(); ++i)
        out[i] = luma(img[i]);
    return out;
}

/// Linear interpolation along a row of samples. Exact at integer positions.
template <typename T>
T lerp_row(const T* row, int n, double x)
{
    if (!(x >= 0.0 && x <= n - 1))
        throw DomainError("sub-pixel position out of range");
    int x0 = static_cast<int>(std::floor(x));
    if (x0 >= n - 1)
        return row[n - 1];
    double t = x - x0;
    if (t == 0.0)
        return row[x0];
    return row[x0] * (1.0 - t) + row[x0 + 1] * t;
}

/// Bilinear sample at (y, x); returns false when the position is outside the image.
inline bool sample_bilinear(const RgbImage& img, double y, double x, Rgb& out)
{
    if (!(y >= 0.0 && y <= img.rows() - 1 && x >= 0.0 && x <= img.cols() - 1))
        return false;
    int y0 = std::min(static_cast<int>(std::floor(y)), img.rows() - 1);
    int x0 = std::min(static_cast<int>(std::floor(x)), img.cols() - 1);
    double ty = y - y0, tx = x - x0;
    int y1 = std::min(y0 + 1, img.rows() - 1), x1 = std::min(x0 + 1, img.cols() - 1);
    if (ty == 0.0 && tx == 0.0) {
        out = img.at(y0, x0);
        return true;
    }
    Rgb top = img.at(y0, x0) * (1.0 - tx) + img.at(y0, x1) * tx;
    Rgb bot = img.at(y1, x0) * (1.0 - tx) + img.at(y1, x1) * tx;
    out = top * (1.0 - ty) + bot * ty;
    return true;
}

} // namespace iibr
