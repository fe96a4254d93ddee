#include "reni/equivariant.hpp"

#include <cmath>
#include <stdexcept>

namespace reni {

std::string to_string(Equivariance mode) {
  switch (mode) {
    case Equivariance::SO3: return "so3";
    case Equivariance::SO2: return "so2";
    case Equivariance::None: return "none";
  }
  return "unknown";
}

Equivariance parse_equivariance(std::string_view name) {
  if (name == "so3" || name == "SO3") return Equivariance::SO3;
  if (name == "so2" || name == "SO2") return Equivariance::SO2;
  if (name == "none" || name == "NONE" || name == "None") return Equivariance::None;
  throw std::invalid_argument("unknown equivariance mode '" + std::string(name) + "'");
}

int dir_feature_size(Equivariance mode, int n) {
  switch (mode) {
    case Equivariance::SO3: return n;
    case Equivariance::SO2: return n + 2;
    case Equivariance::None: return 3;
  }
  return 0;
}

int cond_feature_size(Equivariance mode, int n) {
  switch (mode) {
    case Equivariance::SO3: return n * n;
    case Equivariance::SO2: return n + n * n;
    case Equivariance::None: return 3 * n;
  }
  return 0;
}

void check_latent(const LatentCode& z) {
  if (z.cols() < 1) throw std::invalid_argument("latent code needs at least one column");
  if (z.cols() > kMaxLatentCount) throw std::invalid_argument("latent count exceeds 100");
  if (!z.allFinite()) throw std::invalid_argument("latent code has non-finite entries");
}

namespace {

// Gram matrix flattened row-major; symmetric so the order only matters for
// the file format.
Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.size());
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) out[a * m.cols() + b] = m(a, b);
  return out;
}

Eigen::MatrixXd unflatten_rowmajor(const Eigen::VectorXd& v, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) m(a, b) = v[a * n + b];
  return m;
}

Eigen::Matrix2Xd xz_rows(const LatentCode& z) {
  Eigen::Matrix2Xd out(2, z.cols());
  out.row(0) = z.row(0);
  out.row(1) = z.row(2);
  return out;
}

Eigen::VectorXd cond_features(Equivariance mode, const LatentCode& z) {
  const Eigen::Index n = z.cols();
  Eigen::VectorXd out(cond_feature_size(mode, static_cast<int>(n)));
  switch (mode) {
    case Equivariance::SO3:
      out = flatten_rowmajor(z.transpose() * z);
      break;
    case Equivariance::SO2: {
      const Eigen::Matrix2Xd zxz = xz_rows(z);
      out.head(n) = z.row(1).transpose();
      out.tail(n * n) = flatten_rowmajor(zxz.transpose() * zxz);
      break;
    }
    case Equivariance::None:
      out = Eigen::Map<const Eigen::VectorXd>(z.data(), 3 * n);
      break;
  }
  return out;
}

}  // namespace

InvariantFeatures transform_so3(const Direction& d, const LatentCode& z) {
  return {z.transpose() * d, cond_features(Equivariance::SO3, z), Equivariance::SO3};
}

InvariantFeatures transform_so2(const Direction& d, const LatentCode& z) {
  const Eigen::Index n = z.cols();
  InvariantFeatures f;
  f.mode = Equivariance::SO2;
  f.dir_feat.resize(n + 2);
  f.dir_feat[0] = d.y();
  f.dir_feat.segment(1, n) = (z.row(0) * d.x() + z.row(2) * d.z()).transpose();
  f.dir_feat[n + 1] = std::hypot(d.x(), d.z());
  f.cond_feat = cond_features(Equivariance::SO2, z);
  return f;
}

InvariantFeatures transform_none(const Direction& d, const LatentCode& z) {
  return {d, cond_features(Equivariance::None, z), Equivariance::None};
}

InvariantFeatures transform(Equivariance mode, const Direction& d, const LatentCode& z) {
  switch (mode) {
    case Equivariance::SO3: return transform_so3(d, z);
    case Equivariance::SO2: return transform_so2(d, z);
    case Equivariance::None: return transform_none(d, z);
  }
  throw std::invalid_argument("bad equivariance mode");
}

Eigen::MatrixXd field_inputs(Equivariance mode, const Eigen::Matrix<double, Eigen::Dynamic, 3>& dirs,
                             const LatentCode& z) {
  const Eigen::Index n = z.cols();
  const Eigen::Index p = dirs.rows();
  const int dlen = dir_feature_size(mode, static_cast<int>(n));
  const int clen = cond_feature_size(mode, static_cast<int>(n));
  Eigen::MatrixXd x(p, dlen + clen);
  switch (mode) {
    case Equivariance::SO3:
      x.leftCols(dlen) = dirs * z;
      break;
    case Equivariance::SO2:
      x.col(0) = dirs.col(1);
      x.middleCols(1, n) = dirs.col(0) * z.row(0) + dirs.col(2) * z.row(2);
      x.col(n + 1) = (dirs.col(0).array().square() + dirs.col(2).array().square()).sqrt().matrix();
      break;
    case Equivariance::None:
      x.leftCols(3) = dirs;
      break;
  }
  x.rightCols(clen).rowwise() = cond_features(mode, z).transpose();
  return x;
}

LatentCode field_inputs_backward(Equivariance mode, const Eigen::Matrix<double, Eigen::Dynamic, 3>& dirs,
                                 const LatentCode& z, const Eigen::MatrixXd& g) {
  const Eigen::Index n = z.cols();
  const int dlen = dir_feature_size(mode, static_cast<int>(n));
  const int clen = cond_feature_size(mode, static_cast<int>(n));
  if (g.rows() != dirs.rows() || g.cols() != dlen + clen)
    throw std::invalid_argument("field_inputs_backward: gradient shape mismatch");
  const Eigen::VectorXd gc = g.rightCols(clen).colwise().sum().transpose();
  LatentCode dz = LatentCode::Zero(3, n);
  switch (mode) {
    case Equivariance::SO3: {
      // d' = Z^T d  ->  dZ += d g^T;  G = Z^T Z  ->  dZ += Z (gG + gG^T)
      dz += dirs.transpose() * g.leftCols(dlen);
      const Eigen::MatrixXd gg = unflatten_rowmajor(gc, n);
      dz += z * (gg + gg.transpose());
      break;
    }
    case Equivariance::SO2: {
      const Eigen::MatrixXd gd = g.middleCols(1, n);
      dz.row(0) += dirs.col(0).transpose() * gd;
      dz.row(2) += dirs.col(2).transpose() * gd;
      dz.row(1) += gc.head(n).transpose();
      const Eigen::MatrixXd gg = unflatten_rowmajor(gc.tail(n * n), n);
      const Eigen::MatrixXd sym = gg + gg.transpose();
      dz.row(0) += z.row(0) * sym;
      dz.row(2) += z.row(2) * sym;
      break;
    }
    case Equivariance::None:
      dz = Eigen::Map<const LatentCode>(gc.data(), 3, n);
      break;
  }
  return dz;
}

}  // namespace reni
