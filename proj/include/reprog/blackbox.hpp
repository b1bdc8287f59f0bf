#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "reprog/model.hpp"
#include "reprog/oracle.hpp"

namespace reprog {

// Wire protocol over the child's standard streams, one request at a time:
//   request  "Q <n> <d_S>\n" followed by n lines of d_S space-separated decimals
//   response n lines of K_S space-separated probabilities
//   request  "C\n"  ->  response "<samples served> <requests served>\n"
// Decimals use the shortest round-trip representation.
class BlackboxEndpoint final : public ProbabilityOracle {
 public:
  BlackboxEndpoint(std::vector<std::string> command, std::size_t input_dim, std::size_t num_classes);
  ~BlackboxEndpoint() override;

  BlackboxEndpoint(const BlackboxEndpoint&) = delete;
  BlackboxEndpoint& operator=(const BlackboxEndpoint&) = delete;

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t num_classes() const override { return num_classes_; }

  struct ServedCounts {
    std::size_t samples = 0;
    std::size_t requests = 0;
  };
  // The endpoint's own accounting.
  ServedCounts served();

 protected:
  Tensor do_query(const Tensor& batch) override;

 private:
  void write_all(const std::string& s);
  std::optional<std::string> read_line();
  void shutdown();

  std::vector<std::string> command_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// Fault injection for protocol tests.
struct ServeOptions {
  enum class Fault { none, malformed, bad_sum, crash };
  Fault fault = Fault::none;
  std::size_t fault_after_rows = 0;  // rows answered correctly before the fault
};

// Serves `model` on the streams until EOF. Returns a process exit code.
int serve_model(const FrozenModel& model, std::istream& in, std::ostream& out,
                const ServeOptions& opts = {});

std::string format_decimal(double v);

}  // namespace reprog
