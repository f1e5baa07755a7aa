#include "aclstm/error.hpp"

namespace aclstm {

const char* to_string(IoErrc code) {
  switch (code) {
    case IoErrc::unreadable: return "unreadable file";
    case IoErrc::bad_magic: return "bad magic";
    case IoErrc::bad_version: return "unsupported version";
    case IoErrc::truncated: return "truncated file";
    case IoErrc::length_mismatch: return "length mismatch";
    case IoErrc::rate_mismatch: return "sample rate mismatch";
    case IoErrc::bad_format: return "malformed file";
  }
  return "io error";
}

}  // namespace aclstm
