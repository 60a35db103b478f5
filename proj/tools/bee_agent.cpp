// bee-agent: one overlay node (or the multicast hub) of the local-process backend.

#include <iostream>

#include "CLI11.hpp"
#include "bee/agent.hpp"

int main(int argc, char** argv) {
  CLI::App app{"BEE node agent"};
  int node = 0;
  bool hub = false;
  std::string topology_file;
  std::string address_file;
  std::string workdir = ".";
  app.add_option("--node", node, "Overlay node id");
  app.add_flag("--hub", hub, "Run the multicast hub instead of a node");
  app.add_option("--topology", topology_file, "Topology descriptor (JSON)");
  app.add_option("--addresses", address_file, "Listen/connect address map (JSON)")->required();
  app.add_option("--workdir", workdir, "Node working directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto addresses = bee::read_json_file(address_file).get<bee::net::AddressMap>();
    if (hub) return bee::net::run_hub(addresses);
    if (topology_file.empty()) throw bee::Error("--topology is required for a node");
    bee::net::AgentOptions options;
    options.node = node;
    options.topology = bee::read_json_file(topology_file).get<bee::net::Topology>();
    options.addresses = addresses;
    options.workdir = workdir;
    return bee::net::run_agent(options);
  } catch (const std::exception& e) {
    std::cerr << "bee-agent: " << e.what() << '\n';
    return 1;
  }
}
