#include "mxhoi/optimizer.hpp"

#include <string>

namespace mxhoi {

std::string_view to_string(MomentumPolicy policy) {
  switch (policy) {
    case MomentumPolicy::Shared: return "shared";
    case MomentumPolicy::Independent: return "independent";
    case MomentumPolicy::SequenceFsFirst: return "st-f";
    case MomentumPolicy::SequenceWsFirst: return "st-w";
  }
  throw std::invalid_argument("invalid MomentumPolicy");
}

MomentumPolicy parse_policy(std::string_view name) {
  if (name == "shared") return MomentumPolicy::Shared;
  if (name == "independent") return MomentumPolicy::Independent;
  if (name == "st-f") return MomentumPolicy::SequenceFsFirst;
  if (name == "st-w") return MomentumPolicy::SequenceWsFirst;
  throw std::invalid_argument("unknown momentum policy '" + std::string(name) +
                              "' (expected shared, independent, st-f, st-w)");
}

}  // namespace mxhoi
