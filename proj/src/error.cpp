#include "hmt/error.hpp"

namespace hmt {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::root_has_no_parent: return "RootHasNoParent";
    case ErrorCode::spine_required: return "SpineRequired";
    case ErrorCode::block_misaligned: return "BlockMisaligned";
    case ErrorCode::not_stochastic: return "NotStochastic";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::invalid_root_law: return "InvalidRootLaw";
    case ErrorCode::mask_outside_sample: return "MaskOutsideSample";
    case ErrorCode::degenerate_variance: return "DegenerateVariance";
    case ErrorCode::method_unavailable: return "MethodUnavailable";
    case ErrorCode::region_too_shallow: return "RegionTooShallow";
    case ErrorCode::singular_information: return "SingularInformation";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io: return "IoError";
  }
  return "Error";
}

}  // namespace hmt
