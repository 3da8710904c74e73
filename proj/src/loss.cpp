#include "ogcp/loss.hpp"

namespace ogcp {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "gaussian" || name == "normal") return LossKind::Gaussian;
  if (name == "poisson") return LossKind::Poisson;
  if (name == "bernoulli" || name == "binary") return LossKind::Bernoulli;
  fail(ErrorKind::Domain, "unknown loss '" + std::string(name) +
                              "' (expected gaussian, poisson or bernoulli)");
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Gaussian: return "gaussian";
    case LossKind::Poisson: return "poisson";
    case LossKind::Bernoulli: return "bernoulli";
  }
  return "unknown";
}

}  // namespace ogcp
