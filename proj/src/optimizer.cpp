#include "vut/optimizer.hpp"

#include <cmath>

#include "vut/errors.hpp"

namespace vut {

void AdamW::step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  ++step_;
  last_lr_ = cfg_.lr.at(step_);
  const double lr = last_lr_;

  for (const auto& [name, grad] : grads) {
    Tensor& p = params.tensor(name);
    if (!params.trainable(name)) throw DataError("gradient for non-trainable parameter " + name);
    if (!p.same_shape(grad))
      throw DataError("gradient shape " + shape_str(grad.shape()) + " does not match parameter " +
                      name + " " + shape_str(p.shape()));

    auto mi = m_.find(name);
    if (mi == m_.end()) {
      mi = m_.emplace(name, Tensor::zeros(p.shape(), p.dtype())).first;
      v_.emplace(name, Tensor::zeros(p.shape(), p.dtype()));
      t_.emplace(name, 0);
    }
    Tensor& m = mi->second;
    Tensor& v = v_.at(name);
    int64_t t = ++t_.at(name);
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t));

    dispatch_dtype(p.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto pd = p.mutable_data<T>();
      auto md = m.mutable_data<T>();
      auto vd = v.mutable_data<T>();
      auto gd = grad.data<T>();
      for (size_t i = 0; i < pd.size(); ++i) {
        double g = double(gd[i]);
        double mm = cfg_.beta1 * double(md[i]) + (1.0 - cfg_.beta1) * g;
        double vv = cfg_.beta2 * double(vd[i]) + (1.0 - cfg_.beta2) * g * g;
        md[i] = T(mm);
        vd[i] = T(vv);
        double update = (mm / bc1) / (std::sqrt(vv / bc2) + cfg_.eps);
        pd[i] = T(double(pd[i]) - lr * (update + cfg_.weight_decay * double(pd[i])));
      }
    });
  }
}

void AdamW::restore(int64_t step, std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                    std::map<std::string, int64_t> param_steps) {
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = std::move(param_steps);
}

}  // namespace vut
