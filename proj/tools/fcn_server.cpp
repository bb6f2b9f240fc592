// Blind inference server. Holds the model, the parameters and the public
// evaluation keys; this binary is not linked against any decryption code
// and refuses to be handed a secret key.

#include <CLI11.hpp>

#include "common.hpp"
#include "fcn/server.hpp"

using namespace fcn;
using namespace fcn::cli;

int main(int argc, char** argv) {
  CLI::App app{"fcn-server: evaluate encrypted requests without the secret key"};
  std::string model, params_path, eval_path, listen = "127.0.0.1:7878";
  std::size_t max_connections = 0;
  std::uint64_t cap = kDefaultPayloadCap;
  double input_bound = 1.0;
  std::string forbidden;
  app.add_option("--model", model, "Weights file")->required();
  app.add_option("--params", params_path, "Parameter file")->required();
  app.add_option("--eval-keys", eval_path, "Public evaluation (relinearization) key file")->required();
  app.add_option("--listen", listen, "host:port; port 0 picks a free port");
  app.add_option("--max-connections", max_connections, "Exit after this many connections (0 = never)");
  app.add_option("--payload-cap", cap, "Largest accepted request payload in bytes");
  app.add_option("--input-bound", input_bound, "Bound on |input| assumed by the capacity check");
  for (const char* name : {"--secret-key", "--sk", "--keys"}) {
    app.add_option(name, forbidden)->group("");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (!forbidden.empty()) {
    std::cerr << "error: the server never takes secret key material; pass only --eval-keys\n";
    return kUsage;
  }

  try {
    if (file_magic(eval_path) == kSecretKeyMagic) {
      std::cerr << "error: " << eval_path << " is a secret key; the server accepts only eval keys\n";
      return kUsage;
    }
    const auto pf = load_params(params_path);
    const auto ctx = FvContext::make(pf.params);
    const auto net = load_weights(model);
    auto state = make_server_state(ctx, load_eval_keys(eval_path, ctx), pf.fixed_point(), net, input_bound);
    state.payload_cap = cap;
    Listener listener(listen);
    const auto colon = listen.rfind(':');
    std::cout << "listening on " << listen.substr(0, colon) << ":" << listener.port() << std::endl;
    run_server(listener, state, max_connections, &std::cerr);
    return kOk;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const WeightsFormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
