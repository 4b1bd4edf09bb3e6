#include "ablfield/error.hpp"

namespace ablfield {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
      return "validation";
    case ErrorKind::capacity:
      return "capacity";
    case ErrorKind::zero_probability_branch:
      return "zero-probability-branch";
    case ErrorKind::impossible_post_selection:
      return "impossible-post-selection";
    case ErrorKind::contract:
      return "contract";
    case ErrorKind::io:
      return "io";
    case ErrorKind::invariant:
      return "invariant";
  }
  return "unknown";
}

}  // namespace ablfield
