#include "reprog/blackbox.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>

#include "reprog/errors.hpp"

namespace reprog {

std::string format_decimal(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::vector<double> parse_decimals(std::string_view line, std::size_t expected, std::size_t line_no,
                                   const char* what) {
  std::vector<double> out;
  out.reserve(expected);
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p == end) break;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || (next < end && *next != ' ')) {
      throw ProtocolError(std::string(what) + " line " + std::to_string(line_no) +
                          ": malformed number in \"" + std::string(line) + "\"");
    }
    out.push_back(v);
    p = next;
  }
  if (out.size() != expected) {
    throw ProtocolError(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(expected) + " values, got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

BlackboxEndpoint::BlackboxEndpoint(std::vector<std::string> command, std::size_t input_dim,
                                   std::size_t num_classes)
    : command_(std::move(command)), input_dim_(input_dim), num_classes_(num_classes) {
  if (command_.empty()) throw ConfigError("black-box endpoint command is empty");
  if (input_dim_ == 0 || num_classes_ == 0) throw ConfigError("endpoint dimensions must be positive");
  // A dead child must surface as EPIPE, not kill the client.
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw TransportError(std::string("pipe: ") + std::strerror(errno), 0);
  }
  std::vector<char*> argv;
  for (auto& s : command_) argv.push_back(s.data());
  argv.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw TransportError(std::string("fork: ") + std::strerror(errno), 0);
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

BlackboxEndpoint::~BlackboxEndpoint() { shutdown(); }

void BlackboxEndpoint::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void BlackboxEndpoint::write_all(const std::string& s) {
  std::size_t done = 0;
  while (done < s.size()) {
    const ssize_t n = ::write(to_child_, s.data() + done, s.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("write to endpoint failed: ") + std::strerror(errno), 0);
    }
    done += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> BlackboxEndpoint::read_line() {
  while (true) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Tensor BlackboxEndpoint::do_query(const Tensor& batch) {
  const std::size_t n = batch.rows();
  std::string req = "Q " + std::to_string(n) + " " + std::to_string(input_dim_) + "\n";
  for (std::size_t r = 0; r < n; ++r) {
    auto row = batch.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) req.push_back(' ');
      req += format_decimal(row[c]);
    }
    req.push_back('\n');
  }
  write_all(req);

  Tensor out = Tensor::matrix(n, num_classes_);
  for (std::size_t r = 0; r < n; ++r) {
    auto line = read_line();
    if (!line) {
      throw TransportError("endpoint closed the stream after " + std::to_string(r) + " of " +
                               std::to_string(n) + " response rows",
                           r);
    }
    auto probs = parse_decimals(*line, num_classes_, r + 1, "response");
    double sum = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (!std::isfinite(probs[k]) || probs[k] < 0.0 || probs[k] > 1.0) {
        throw ProtocolError("response line " + std::to_string(r + 1) + ": entry " +
                            std::to_string(k) + " is not a probability");
      }
      sum += probs[k];
      out(r, k) = probs[k];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ProtocolError("response line " + std::to_string(r + 1) + ": probabilities sum to " +
                          format_decimal(sum));
    }
  }
  return out;
}

BlackboxEndpoint::ServedCounts BlackboxEndpoint::served() {
  write_all("C\n");
  auto line = read_line();
  if (!line) throw TransportError("endpoint closed the stream before reporting counts", 0);
  auto v = parse_decimals(*line, 2, 1, "count");
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])};
}

int serve_model(const FrozenModel& model, std::istream& in, std::ostream& out,
                const ServeOptions& opts) {
  std::size_t samples = 0;
  std::size_t requests = 0;
  std::size_t rows_answered = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "C") {
      out << samples << ' ' << requests << '\n' << std::flush;
      continue;
    }
    std::istringstream head(line);
    std::string tag;
    std::size_t n = 0, d = 0;
    if (!(head >> tag >> n >> d) || tag != "Q") {
      std::cerr << "reprog-serve: bad request line \"" << line << "\"\n";
      return 2;
    }
    if (d != model.input_dim()) {
      std::cerr << "reprog-serve: request dimension " << d << " != model input " << model.input_dim() << '\n';
      return 2;
    }
    Tensor batch = Tensor::matrix(n == 0 ? 1 : n, d);
    for (std::size_t r = 0; r < n; ++r) {
      if (!std::getline(in, line)) {
        std::cerr << "reprog-serve: request truncated\n";
        return 2;
      }
      auto v = parse_decimals(line, d, r + 1, "request");
      std::copy(v.begin(), v.end(), batch.row(r).begin());
    }
    if (n == 0) {
      ++requests;
      continue;
    }
    const Tensor probs = forward(model, batch);
    for (std::size_t r = 0; r < n; ++r) {
      if (opts.fault != ServeOptions::Fault::none && rows_answered >= opts.fault_after_rows) {
        switch (opts.fault) {
          case ServeOptions::Fault::crash:
            out << std::flush;
            return 3;
          case ServeOptions::Fault::malformed:
            out << "not-a-number\n" << std::flush;
            break;
          case ServeOptions::Fault::bad_sum:
            for (std::size_t k = 0; k < probs.cols(); ++k) out << (k ? " " : "") << "0.5";
            out << '\n' << std::flush;
            break;
          case ServeOptions::Fault::none:
            break;
        }
        ++rows_answered;
        continue;
      }
      auto row = probs.row(r);
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << format_decimal(row[k]);
      out << '\n';
      ++rows_answered;
    }
    out << std::flush;
    samples += n;
    ++requests;
  }
  return 0;
}

}  // namespace reprog
