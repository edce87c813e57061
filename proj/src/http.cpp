#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "etas/catalog.hpp"

namespace etas {

HttpGet default_http_get() {
  return [](const std::string& host, const std::string& target) -> HttpResponse {
    httplib::Client client(host);
    client.set_connection_timeout(15);
    client.set_read_timeout(120);
    client.set_follow_location(true);
    auto res = client.Get(target);
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  };
}

}  // namespace etas
