#pragma once

#include <stdexcept>
#include <string>

namespace gaprune {

// Base class for everything thrown by this library. `category()` is the
// stable machine-readable tag the CLI prints in its single-line errors.
class error : public std::runtime_error {
  public:
    error(std::string category, const std::string & msg)
        : std::runtime_error(msg), category_(std::move(category)) {}

    const std::string & category() const { return category_; }

  private:
    std::string category_;
};

#define GAPRUNE_DEFINE_ERROR(name, tag)                                    \
    class name : public error {                                            \
      public:                                                              \
        explicit name(const std::string & msg) : error(tag, msg) {}        \
    }

GAPRUNE_DEFINE_ERROR(shape_error, "shape");
GAPRUNE_DEFINE_ERROR(argument_error, "argument");
GAPRUNE_DEFINE_ERROR(contract_error, "contract");
GAPRUNE_DEFINE_ERROR(config_error, "config");
GAPRUNE_DEFINE_ERROR(parse_error, "parse");
GAPRUNE_DEFINE_ERROR(input_error, "input");
GAPRUNE_DEFINE_ERROR(integrity_error, "integrity");
GAPRUNE_DEFINE_ERROR(state_error, "state");
GAPRUNE_DEFINE_ERROR(training_error, "training");
GAPRUNE_DEFINE_ERROR(report_error, "report");
GAPRUNE_DEFINE_ERROR(dependency_error, "dependency");
GAPRUNE_DEFINE_ERROR(undefined_error, "undefined");
GAPRUNE_DEFINE_ERROR(io_error, "io");
GAPRUNE_DEFINE_ERROR(internal_error, "internal");

#undef GAPRUNE_DEFINE_ERROR

} // namespace gaprune
