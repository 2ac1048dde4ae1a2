#include "reccas/param_store.hpp"

#include <cmath>
#include <stdexcept>

#include "reccas/kernels.hpp"

namespace reccas {

int ParamStore::add_group(const std::string& name, std::size_t rows,
                          std::size_t cols) {
  if (group_id(name) >= 0) {
    throw std::invalid_argument("duplicate parameter group " + name);
  }
  Group g;
  g.name = name;
  g.rows = rows;
  g.cols = cols;
  g.data.assign(rows * cols, 0.0);
  groups_.push_back(std::move(g));
  return static_cast<int>(groups_.size()) - 1;
}

int ParamStore::group_id(const std::string& name) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ParamStore::Group& ParamStore::group(const std::string& name) {
  const int id = group_id(name);
  if (id < 0) throw std::invalid_argument("no parameter group " + name);
  return groups_[static_cast<std::size_t>(id)];
}

const ParamStore::Group& ParamStore::group(const std::string& name) const {
  const int id = group_id(name);
  if (id < 0) throw std::invalid_argument("no parameter group " + name);
  return groups_[static_cast<std::size_t>(id)];
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.data.size();
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& g : groups_) {
    for (const double x : g.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

GradBuffer::GradBuffer(const ParamStore& params) {
  grads_.reserve(params.group_count());
  for (std::size_t i = 0; i < params.group_count(); ++i) {
    grads_.emplace_back(params.group(static_cast<int>(i)).data.size(), 0.0);
  }
}

void GradBuffer::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

bool GradBuffer::all_finite() const {
  for (const auto& g : grads_) {
    for (const double x : g) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    kernels::active().axpy(1.0, other.grads_[i].data(), grads_[i].data(),
                           grads_[i].size());
  }
}

void GradBuffer::scale(double s) {
  for (auto& g : grads_) {
    for (auto& x : g) x *= s;
  }
}

AdamState::AdamState(const ParamStore& params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.group_count());
  v_.reserve(params.group_count());
  for (std::size_t i = 0; i < params.group_count(); ++i) {
    const std::size_t n = params.group(static_cast<int>(i)).data.size();
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

bool AdamState::step(ParamStore& params, const GradBuffer& grads) {
  if (!grads.all_finite()) return false;
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const auto& ops = kernels::active();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto& g = params.group(static_cast<int>(i));
    ops.adam_update(g.data.data(), grads.group(static_cast<int>(i)).data(),
                    m_[i].data(), v_[i].data(), g.data.size(), config_.lr,
                    config_.beta1, config_.beta2, config_.eps, bc1, bc2);
  }
  return true;
}

}  // namespace reccas
