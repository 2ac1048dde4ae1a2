#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace reccas {

// Named, fixed-shape groups of real parameters (embeddings tables, cell
// weights, bias rows...). Groups are row-major; a "row" is the unit the math
// reads (one node's embedding, one gate's bias, one weight-matrix row).
class ParamStore {
 public:
  struct Group {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows*cols, row-major

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  };

  int add_group(const std::string& name, std::size_t rows, std::size_t cols);
  int group_id(const std::string& name) const;  // -1 when absent
  bool has_group(const std::string& name) const { return group_id(name) >= 0; }

  Group& group(int id) { return groups_[static_cast<std::size_t>(id)]; }
  const Group& group(int id) const { return groups_[static_cast<std::size_t>(id)]; }
  Group& group(const std::string& name);
  const Group& group(const std::string& name) const;

  std::size_t group_count() const { return groups_.size(); }
  std::size_t total_size() const;
  bool all_finite() const;

 private:
  std::vector<Group> groups_;
};

// Gradient accumulator shaped like a ParamStore. backward() adds into it;
// callers zero it between optimization steps.
class GradBuffer {
 public:
  explicit GradBuffer(const ParamStore& params);

  void zero();
  std::vector<double>& group(int id) { return grads_[static_cast<std::size_t>(id)]; }
  const std::vector<double>& group(int id) const {
    return grads_[static_cast<std::size_t>(id)];
  }
  double* row(int id, std::size_t r, std::size_t cols) {
    return grads_[static_cast<std::size_t>(id)].data() + r * cols;
  }
  std::size_t group_count() const { return grads_.size(); }
  bool all_finite() const;
  void add(const GradBuffer& other);     // element-wise sum (reduction)
  void scale(double s);

 private:
  std::vector<std::vector<double>> grads_;
};

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected ADAM over every group of a ParamStore. step() applies one
// descent update (training code minimizes the negative objective) and
// returns false without touching anything when the gradient is non-finite.
class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig config);

  bool step(ParamStore& params, const GradBuffer& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }

  // Serialization access (flat per-group buffers, same order as the store).
  std::vector<std::vector<double>>& moments1() { return m_; }
  std::vector<std::vector<double>>& moments2() { return v_; }
  const std::vector<std::vector<double>>& moments1() const { return m_; }
  const std::vector<std::vector<double>>& moments2() const { return v_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace reccas
