#pragma once

// Wiring of data + formula + prior choice into a ready-to-sample posterior.

#include <string>
#include <vector>

#include "gcorr/glm.hpp"
#include "gcorr/models.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

struct PriorChoice {
  enum class Kind { UnitInformation, Fixed, Mixture };
  Kind kind = Kind::UnitInformation;
  double g = 0.0;      // Fixed
  double var_g = 0.0;  // Mixture: IG with mean N and this variance
  bool flat_intercept = false;

  GLaw law(double n) const {
    switch (kind) {
      case Kind::Fixed: return FixedG{g};
      case Kind::Mixture: return mixture_ig_params(n, var_g);
      case Kind::UnitInformation: break;
    }
    return UnitInformation{};
  }

  /// Parses "N", "fixed:<g>" or "ig:<var>".
  static PriorChoice parse(const std::string& text) {
    PriorChoice c;
    auto number = [&](const std::string& s) {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(s, &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != s.size() || !(v > 0)) throw Error(ErrorCode::InvalidArgument, "--g: bad number '" + s + "'");
      return v;
    };
    if (text == "N" || text == "unit") return c;
    if (text.rfind("fixed:", 0) == 0) {
      c.kind = Kind::Fixed;
      c.g = number(text.substr(6));
      return c;
    }
    if (text.rfind("ig:", 0) == 0) {
      c.kind = Kind::Mixture;
      c.var_g = number(text.substr(3));
      return c;
    }
    throw Error(ErrorCode::InvalidArgument, "--g must be N, fixed:<v> or ig:<var>, got '" + text + "'");
  }
};

class ModelProblem {
 public:
  ModelProblem(const ContingencyTable& table, const ModelFormula& model, const PriorChoice& choice)
      : model_(model), design_(design_matrix(table, model)), posterior_(table, design_.matrix) {
    init(gprior_loglinear(design_, table), choice, static_cast<double>(table.total()),
         [&](const Eigen::MatrixXd& x) { return GlmPosterior(table, x); });
  }

  ModelProblem(const BinomialData& data, const ModelFormula& model, const PriorChoice& choice)
      : model_(model), design_(design_matrix(data, model)), posterior_(data, design_.matrix) {
    init(gprior_logistic(design_, data), choice, static_cast<double>(data.total_trials()),
         [&](const Eigen::MatrixXd& x) { return GlmPosterior(data, x); });
  }

  const ModelFormula& model() const { return model_; }
  const DesignMatrix& design() const { return design_; }
  const GPriorSpec& prior() const { return prior_; }
  const GlmPosterior& posterior() const { return posterior_; }
  /// Labels of every sampled coordinate (the intercept included).
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  template <class MakePosterior>
  void init(GPriorSpec full, const PriorChoice& choice, double n, MakePosterior make) {
    full.g_law = choice.law(n);
    labels_ = design_.names();
    if (choice.flat_intercept) {
      auto flat = apply_flat_intercept(full, design_);
      prior_ = flat.prior;
      posterior_ = make(flat.centered);
    } else {
      prior_ = full;
    }
    posterior_.set_prior(prior_);
  }

  ModelFormula model_;
  DesignMatrix design_;
  GlmPosterior posterior_;
  GPriorSpec prior_;
  std::vector<std::string> labels_;
};

}  // namespace gcorr
