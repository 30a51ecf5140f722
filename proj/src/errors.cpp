#include "flick/errors.hpp"

namespace flick {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return "argument error";
    case ErrorKind::format: return "format error";
    case ErrorKind::data: return "data error";
    case ErrorKind::io: return "io error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::selection: return "selection error";
  }
  return "error";
}

}  // namespace flick
