#include "assoc/errors.hpp"

namespace assoc {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::argument:
      return "argument";
    case ErrorCategory::config:
      return "config";
    case ErrorCategory::data:
      return "data";
    case ErrorCategory::evaluation:
      return "evaluation";
    case ErrorCategory::convergence:
      return "convergence";
    case ErrorCategory::identifiability:
      return "identifiability";
    case ErrorCategory::consistency:
      return "consistency";
  }
  return "unknown";
}

}  // namespace assoc
