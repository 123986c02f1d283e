#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "freqseg/autodiff/tensor.hpp"

namespace freqseg::ad {

/// Define-by-run record of differentiable operations.
///
/// Operations append an entry when recording is on and at least one input
/// requires a gradient. Entries are stored in execution order, so every
/// entry's inputs were produced before it; backward() walks them in reverse,
/// visiting each exactly once.
class Tape {
 public:
  enum class Mode { record, off };
  using BackwardFn = std::function<void()>;

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}

  bool recording() const { return mode_ == Mode::record; }

  /// Whether an op over `inputs` should be recorded; also the value to use
  /// for the output's requires_grad flag.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  bool wants(const std::vector<Tensor>& inputs) const;

  /// `fn` reads output's gradient and accumulates into the inputs that
  /// require one.
  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn);

  /// Reverse-mode sweep from a single-element loss. Gradients of every tensor
  /// on the tape are reset first, so repeated calls give identical results.
  void backward(Tensor loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };

  Mode mode_;
  std::vector<Entry> entries_;
};

}  // namespace freqseg::ad
