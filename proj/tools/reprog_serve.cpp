// Serves a checkpoint over the black-box query protocol on stdin/stdout.
#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "reprog/blackbox.hpp"
#include "reprog/checkpoint.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Answer probability queries for a frozen checkpoint", "reprog-serve"};
  std::string checkpoint;
  std::string fault = "none";
  std::size_t fault_after = 0;
  app.add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  app.add_option("--fault", fault, "inject a protocol fault")
      ->check(CLI::IsMember({"none", "malformed", "bad_sum", "crash"}));
  app.add_option("--fault-after", fault_after, "rows answered correctly before the fault");
  CLI11_PARSE(app, argc, argv);

  static const std::map<std::string, reprog::ServeOptions::Fault> faults = {
      {"none", reprog::ServeOptions::Fault::none},
      {"malformed", reprog::ServeOptions::Fault::malformed},
      {"bad_sum", reprog::ServeOptions::Fault::bad_sum},
      {"crash", reprog::ServeOptions::Fault::crash},
  };
  try {
    const reprog::FrozenModel model = reprog::load_checkpoint(checkpoint);
    std::ios::sync_with_stdio(false);
    return reprog::serve_model(model, std::cin, std::cout, {faults.at(fault), fault_after});
  } catch (const std::exception& e) {
    std::cerr << "reprog-serve: " << e.what() << "\n";
    return 3;
  }
}
