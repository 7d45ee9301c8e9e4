/*
 * Copyright 2026 The filtopt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "filtopt/factors.hpp"

#include <algorithm>
#include <cmath>

namespace filtopt {

void FullState::add_block(int id, BlockKind kind, ManifoldPoint value) {
  if (has_block(id)) throw StructureError("FullState: duplicate block id " + std::to_string(id));
  blocks_.push_back({id, kind, std::move(value)});
  rebuild_layout();
}

void FullState::remove_block(int id) {
  const int i = index_of(id);
  blocks_.erase(blocks_.begin() + i);
  rebuild_layout();
}

bool FullState::has_block(int id) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [id](const StateBlock& b) { return b.id == id; });
}

int FullState::index_of(int id) const {
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].id == id) return static_cast<int>(i);
  }
  throw StructureError("FullState: no block with id " + std::to_string(id));
}

void FullState::rebuild_layout() {
  offsets_.resize(blocks_.size());
  int off = 0;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    offsets_[i] = off;
    off += blocks_[i].value.tangent_dim();
  }
  total_dim_ = off;
}

const ManifoldPoint& FullState::value(int id) const { return blocks_[index_of(id)].value; }

void FullState::set_value(int id, ManifoldPoint value) {
  StateBlock& b = blocks_[index_of(id)];
  if (!b.value.same_structure(value)) {
    throw StructureError("FullState::set_value: structure change for block " + std::to_string(id));
  }
  b.value = std::move(value);
}

BlockKind FullState::kind(int id) const { return blocks_[index_of(id)].kind; }

std::pair<int, int> FullState::span(int id) const {
  const int i = index_of(id);
  return {offsets_[i], blocks_[i].value.tangent_dim()};
}

std::vector<int> FullState::ids() const {
  std::vector<int> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(b.id);
  return out;
}

bool FullState::same_structure(const FullState& o) const {
  if (blocks_.size() != o.blocks_.size()) return false;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].id != o.blocks_[i].id) return false;
    if (!blocks_[i].value.same_structure(o.blocks_[i].value)) return false;
  }
  return true;
}

FullState FullState::retract(const VecX& delta) const {
  if (delta.size() != total_dim_) throw StructureError("FullState::retract: dimension mismatch");
  FullState out = *this;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const int d = blocks_[i].value.tangent_dim();
    out.blocks_[i].value = boxplus(blocks_[i].value, delta.segment(offsets_[i], d));
  }
  return out;
}

VecX FullState::local(const FullState& other) const {
  if (!same_structure(other)) throw StructureError("FullState::local: structure mismatch");
  VecX out(total_dim_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const int d = blocks_[i].value.tangent_dim();
    out.segment(offsets_[i], d) = boxminus(other.blocks_[i].value, blocks_[i].value);
  }
  return out;
}

VecX ResidualBlock::evaluate(const BlockValues& v) const {
  VecX r = eval(v);
  if (r.size() != residual_dim) {
    throw StructureError("ResidualBlock: evaluator returned wrong dimension");
  }
  return r;
}

void GaussianBelief::validate(double tol) const {
  const MatX& c = covariance;
  if (c.rows() != c.cols() || c.rows() != mean.tangent_dim()) {
    throw StructureError("GaussianBelief: covariance dimension mismatch");
  }
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw NumericalError("GaussianBelief: covariance not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(symmetrize(c), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol) {
    throw NumericalError("GaussianBelief: covariance not PSD");
  }
}

MatX sqrt_information(const MatX& covariance) {
  Eigen::LLT<MatX> llt(symmetrize(covariance));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sqrt_information: covariance not SPD");
  }
  const MatX ident = MatX::Identity(covariance.rows(), covariance.cols());
  const MatX info = symmetrize(llt.solve(ident));
  Eigen::LLT<MatX> llt_info(info);
  if (llt_info.info() != Eigen::Success) {
    throw NumericalError("sqrt_information: information not SPD");
  }
  // L^T with L L^T = Sigma^{-1}, so (L^T)^T (L^T) = Sigma^{-1}.
  return MatX(llt_info.matrixL()).transpose();
}

namespace {

int kind_rank(ResidualKind k) {
  switch (k) {
    case ResidualKind::prior:
      return 0;
    case ResidualKind::dynamics:
      return 1;
    case ResidualKind::measurement:
      return 2;
  }
  return 3;
}

bool order_before(const ResidualBlock& a, const ResidualBlock& b) {
  const int ra = kind_rank(a.kind), rb = kind_rank(b.kind);
  if (ra != rb) return ra < rb;
  if (a.key1 != b.key1) return a.key1 < b.key1;
  return a.key2 < b.key2;
}

}  // namespace

void RunningCost::check_residual(const ResidualBlock& b) const {
  for (int id : b.block_ids) {
    if (!state_.has_block(id)) {
      throw StructureError("RunningCost: residual references unknown block " + std::to_string(id));
    }
  }
  if (b.sqrt_info.cols() != b.residual_dim) {
    throw StructureError("RunningCost: sqrt_info columns != residual_dim");
  }
  if (!b.eval) throw StructureError("RunningCost: residual without evaluator");
}

int RunningCost::add_residual(ResidualBlock block) {
  check_residual(block);
  block.id = next_id_++;
  auto it = std::upper_bound(residuals_.begin(), residuals_.end(), block, order_before);
  const int id = block.id;
  residuals_.insert(it, std::move(block));
  return id;
}

void RunningCost::remove_residual(int id) {
  auto it = std::find_if(residuals_.begin(), residuals_.end(),
                         [id](const ResidualBlock& b) { return b.id == id; });
  if (it == residuals_.end()) throw StructureError("RunningCost: no residual " + std::to_string(id));
  residuals_.erase(it);
}

int RunningCost::residual_dim() const {
  int d = 0;
  for (const auto& r : residuals_) d += static_cast<int>(r.sqrt_info.rows());
  return d;
}

namespace {

BlockValues gather(const FullState& x, const std::vector<int>& ids) {
  BlockValues v;
  v.reserve(ids.size());
  for (int id : ids) v.push_back(x.value(id));
  return v;
}

}  // namespace

VecX RunningCost::stack_residuals(const FullState& x) const {
  if (!state_.same_structure(x)) throw StructureError("stack_residuals: state structure mismatch");
  VecX out(residual_dim());
  int row = 0;
  for (const auto& r : residuals_) {
    const VecX raw = r.evaluate(gather(x, r.block_ids));
    out.segment(row, r.sqrt_info.rows()) = r.sqrt_info * raw;
    row += static_cast<int>(r.sqrt_info.rows());
  }
  return out;
}

double RunningCost::eval_cost(const FullState& x) const {
  return stack_residuals(x).squaredNorm();
}

std::vector<MatX> numeric_jacobian(const ResidualEval& eval, const BlockValues& values) {
  std::vector<MatX> out;
  const VecX r0 = eval(values);
  for (size_t b = 0; b < values.size(); ++b) {
    const int d = values[b].tangent_dim();
    MatX jb(r0.size(), d);
    BlockValues v = values;
    for (int i = 0; i < d; ++i) {
      VecX e = VecX::Zero(d);
      e[i] = kFdStep;
      v[b] = boxplus(values[b], e);
      const VecX rp = eval(v);
      e[i] = -kFdStep;
      v[b] = boxplus(values[b], e);
      const VecX rm = eval(v);
      v[b] = values[b];
      jb.col(i) = (rp - rm) / (2.0 * kFdStep);
    }
    out.push_back(std::move(jb));
  }
  return out;
}

MatX RunningCost::jacobian(const FullState& x) const {
  if (!state_.same_structure(x)) throw StructureError("jacobian: state structure mismatch");
  MatX out = MatX::Zero(residual_dim(), x.tangent_dim());
  int row = 0;
  for (const auto& r : residuals_) {
    const BlockValues v = gather(x, r.block_ids);
    std::vector<MatX> raw = r.jac ? r.jac(v) : numeric_jacobian(r.eval, v);
    if (raw.size() != r.block_ids.size()) {
      throw StructureError("jacobian: analytic Jacobian block count mismatch");
    }
    const int rows = static_cast<int>(r.sqrt_info.rows());
    for (size_t b = 0; b < r.block_ids.size(); ++b) {
      const auto [off, dim] = x.span(r.block_ids[b]);
      if (raw[b].rows() != r.residual_dim || raw[b].cols() != dim) {
        throw StructureError("jacobian: analytic Jacobian shape mismatch");
      }
      // Accumulate so a residual may reference the same block twice.
      out.block(row, off, rows, dim) += r.sqrt_info * raw[b];
    }
    row += rows;
  }
  if (!out.allFinite()) throw NumericalError("jacobian: non-finite entries (evaluator fault)");
  return out;
}

MatX boxminus_jacobian(const ManifoldPoint& x, const ManifoldPoint& mu) {
  using Kind = ManifoldPoint::Kind;
  const int d = x.tangent_dim();
  switch (x.kind()) {
    case Kind::Euclidean:
      return MatX::Identity(d, d);
    case Kind::Quat:
    case Kind::Rot:
      return inv_jacobian_right(boxminus(x, mu));
    case Kind::Product: {
      MatX out = MatX::Zero(d, d);
      int off = 0;
      for (size_t i = 0; i < x.parts().size(); ++i) {
        const int di = x.parts()[i].tangent_dim();
        out.block(off, off, di, di) = boxminus_jacobian(x.parts()[i], mu.parts()[i]);
        off += di;
      }
      return out;
    }
  }
  throw StructureError("boxminus_jacobian: unknown kind");
}

MatX boxminus_jacobian_wrt_base(const ManifoldPoint& y, const ManifoldPoint& m) {
  using Kind = ManifoldPoint::Kind;
  const int d = y.tangent_dim();
  switch (y.kind()) {
    case Kind::Euclidean:
      return -MatX::Identity(d, d);
    case Kind::Quat:
    case Kind::Rot:
      return -inv_jacobian_left(boxminus(y, m));
    case Kind::Product: {
      MatX out = MatX::Zero(d, d);
      int off = 0;
      for (size_t i = 0; i < y.parts().size(); ++i) {
        const int di = y.parts()[i].tangent_dim();
        out.block(off, off, di, di) = boxminus_jacobian_wrt_base(y.parts()[i], m.parts()[i]);
        off += di;
      }
      return out;
    }
  }
  throw StructureError("boxminus_jacobian_wrt_base: unknown kind");
}

int RunningCost::add_prior(const GaussianBelief& belief, ResidualKind kind) {
  const MatX sqrt_info = sqrt_information(belief.covariance);
  ResidualBlock b;
  b.kind = kind;
  b.block_ids = belief.mean.ids();
  b.sqrt_info = sqrt_info;
  b.residual_dim = belief.mean.tangent_dim();
  FullState mean = belief.mean;
  b.eval = [mean](const BlockValues& v) {
    VecX r(mean.tangent_dim());
    int off = 0;
    const auto& blocks = mean.blocks();
    for (size_t i = 0; i < blocks.size(); ++i) {
      const int d = blocks[i].value.tangent_dim();
      r.segment(off, d) = boxminus(v[i], blocks[i].value);
      off += d;
    }
    return r;
  };
  b.jac = [mean](const BlockValues& v) {
    std::vector<MatX> out;
    const auto& blocks = mean.blocks();
    const int total = mean.tangent_dim();
    int off = 0;
    for (size_t i = 0; i < blocks.size(); ++i) {
      const int d = blocks[i].value.tangent_dim();
      MatX jb = MatX::Zero(total, d);
      jb.block(off, 0, d, d) = boxminus_jacobian(v[i], blocks[i].value);
      out.push_back(std::move(jb));
      off += d;
    }
    return out;
  };
  return add_residual(std::move(b));
}

int RunningCost::add_prior_sqrt_info(const FullState& mean, const MatX& sqrt_info) {
  ResidualBlock b;
  b.kind = ResidualKind::prior;
  b.block_ids = mean.ids();
  b.sqrt_info = sqrt_info;
  b.residual_dim = mean.tangent_dim();
  FullState m = mean;
  b.eval = [m](const BlockValues& v) {
    VecX r(m.tangent_dim());
    int off = 0;
    const auto& blocks = m.blocks();
    for (size_t i = 0; i < blocks.size(); ++i) {
      const int d = blocks[i].value.tangent_dim();
      r.segment(off, d) = boxminus(v[i], blocks[i].value);
      off += d;
    }
    return r;
  };
  b.jac = [m](const BlockValues& v) {
    std::vector<MatX> out;
    const auto& blocks = m.blocks();
    const int total = m.tangent_dim();
    int off = 0;
    for (size_t i = 0; i < blocks.size(); ++i) {
      const int d = blocks[i].value.tangent_dim();
      MatX jb = MatX::Zero(total, d);
      jb.block(off, 0, d, d) = boxminus_jacobian(v[i], blocks[i].value);
      out.push_back(std::move(jb));
      off += d;
    }
    return out;
  };
  return add_residual(std::move(b));
}

}  // namespace filtopt
