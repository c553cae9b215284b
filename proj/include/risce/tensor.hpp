#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "risce/errors.hpp"

namespace risce {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using BoolArr = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Order-3 tensor of complex samples indexed (k, t, p).
///
/// Storage is k-fastest, then t, then p, so the (k, t) face at a fixed p is
/// a contiguous column-major block; slice(p) exposes it as an Eigen map
/// without copying.
class Tensor3 {
public:
    Tensor3() = default;

    Tensor3(Eigen::Index dim_k, Eigen::Index dim_t, Eigen::Index dim_p)
        : dim_k_(dim_k), dim_t_(dim_t), dim_p_(dim_p),
          data_(static_cast<std::size_t>(dim_k * dim_t * dim_p), cxd{0.0, 0.0}) {
        if (dim_k < 0 || dim_t < 0 || dim_p < 0)
            throw dimension_error("Tensor3: negative dimension");
    }

    Eigen::Index dim_k() const { return dim_k_; }
    Eigen::Index dim_t() const { return dim_t_; }
    Eigen::Index dim_p() const { return dim_p_; }
    Eigen::Index size() const { return dim_k_ * dim_t_ * dim_p_; }

    cxd& operator()(Eigen::Index k, Eigen::Index t, Eigen::Index p) {
        return data_[static_cast<std::size_t>(k + dim_k_ * (t + dim_t_ * p))];
    }
    const cxd& operator()(Eigen::Index k, Eigen::Index t, Eigen::Index p) const {
        return data_[static_cast<std::size_t>(k + dim_k_ * (t + dim_t_ * p))];
    }

    /// Bounds-checked access.
    const cxd& at(Eigen::Index k, Eigen::Index t, Eigen::Index p) const {
        if (k < 0 || k >= dim_k_ || t < 0 || t >= dim_t_ || p < 0 || p >= dim_p_)
            throw index_error("Tensor3::at: index out of range");
        return (*this)(k, t, p);
    }

    /// The K x T face at phase index p, as a view into the tensor.
    Eigen::Map<CMat> slice(Eigen::Index p) {
        check_slice(p);
        return {data_.data() + dim_k_ * dim_t_ * p, dim_k_, dim_t_};
    }
    Eigen::Map<const CMat> slice(Eigen::Index p) const {
        check_slice(p);
        return {data_.data() + dim_k_ * dim_t_ * p, dim_k_, dim_t_};
    }

    double squared_norm() const {
        double acc = 0.0;
        for (const cxd& v : data_) acc += std::norm(v);
        return acc;
    }

private:
    void check_slice(Eigen::Index p) const {
        if (p < 0 || p >= dim_p_)
            throw index_error("Tensor3::slice: phase index out of range");
    }

    Eigen::Index dim_k_ = 0;
    Eigen::Index dim_t_ = 0;
    Eigen::Index dim_p_ = 0;
    std::vector<cxd> data_;
};

} // namespace risce
