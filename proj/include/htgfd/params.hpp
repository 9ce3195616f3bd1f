#pragma once

#include "htgfd/common.hpp"
#include "htgfd/rng.hpp"
#include "htgfd/tape.hpp"

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace htgfd {

// Ordered, named collection of learnable tensors. Insertion order is the
// canonical order for checkpoints and optimizer state.
template <class S>
class ParamStore {
 public:
  int add(std::string name, Mat<S> value) {
    require(index_.find(name) == index_.end(),
            "duplicate parameter name: " + name);
    int id = static_cast<int>(values_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return id;
  }

  // uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
  int add_uniform(std::string name, Index rows, Index cols, Index fan_in,
                  Rng& rng) {
    Mat<S> m(rows, cols);
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<S>(rng.sym(a));
    return add(std::move(name), std::move(m));
  }

  int add_zeros(std::string name, Index rows, Index cols) {
    return add(std::move(name), Mat<S>::Zero(rows, cols));
  }

  bool has(std::string_view name) const {
    return index_.find(std::string(name)) != index_.end();
  }

  int id(std::string_view name) const {
    auto it = index_.find(std::string(name));
    require(it != index_.end(), "unknown parameter: " + std::string(name));
    return it->second;
  }

  Mat<S>& operator[](std::string_view name) { return values_[id(name)]; }
  const Mat<S>& operator[](std::string_view name) const {
    return values_[id(name)];
  }

  size_t size() const { return values_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Mat<S>& value(size_t i) { return values_[i]; }
  const Mat<S>& value(size_t i) const { return values_[i]; }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  // total scalars among parameters whose name starts with prefix
  int64_t scalar_count(std::string_view prefix) const {
    int64_t n = 0;
    for (size_t i = 0; i < values_.size(); ++i)
      if (names_[i].rfind(prefix, 0) == 0) n += values_[i].size();
    return n;
  }

  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (size_t i = 0; i < values_.size(); ++i)
      out.add(names_[i], values_[i].template cast<T>().eval());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<S>> values_;
  std::unordered_map<std::string, int> index_;
};

// Parameters registered on a tape, either as trainable leaves or as frozen
// constants. Lookup by name resolves to the tape node.
template <class S>
class Bound {
 public:
  static Bound leaves(Tape<S>& tape, const ParamStore<S>& store) {
    return Bound(tape, store, true);
  }
  static Bound frozen(Tape<S>& tape, const ParamStore<S>& store) {
    return Bound(tape, store, false);
  }

  Var operator[](std::string_view name) const {
    return vars_[static_cast<size_t>(store_->id(name))];
  }

  const ParamStore<S>& store() const { return *store_; }
  bool trainable() const { return trainable_; }

  // gradients in store order (zero matrices where untouched); call after
  // Tape::backward
  std::vector<Mat<S>> gradients(const Tape<S>& tape) const {
    std::vector<Mat<S>> gs;
    gs.reserve(vars_.size());
    for (size_t i = 0; i < vars_.size(); ++i) {
      const Mat<S>& g = tape.grad(vars_[i]);
      if (g.size() == 0)
        gs.push_back(Mat<S>::Zero(store_->value(i).rows(),
                                  store_->value(i).cols()));
      else
        gs.push_back(g);
    }
    return gs;
  }

 private:
  Bound(Tape<S>& tape, const ParamStore<S>& store, bool trainable)
      : store_(&store), trainable_(trainable) {
    vars_.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i)
      vars_.push_back(trainable ? tape.leaf(store.value(i))
                                : tape.constant(store.value(i)));
  }

  const ParamStore<S>* store_;
  std::vector<Var> vars_;
  bool trainable_;
};

}  // namespace htgfd
