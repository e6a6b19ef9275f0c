// Copyright 2026 The miniorch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <thread>

#include "httplib.h"
#include "miniorch/transfer.hpp"

namespace miniorch {

struct CatalogServer::Impl {
  explicit Impl(const SourceCatalog& c) : catalog(c) {
    server.Get(R"(/files/([^/?]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::string name = req.matches[1];
      std::string section = req.has_param("section") ? req.get_param_value("section") : catalog.subset_section();
      try {
        Bytes bytes = catalog.section_content(name, section);
        res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
      } catch (const Error& e) {
        res.status = 404;
        res.set_header("X-Error", std::string(error_code_name(e.code())));
        res.set_content(e.what(), "text/plain");
      }
    });
  }

  const SourceCatalog& catalog;
  httplib::Server server;
  std::thread thread;
};

CatalogServer::CatalogServer(const SourceCatalog& catalog) : impl_(std::make_unique<Impl>(catalog)) {}

CatalogServer::~CatalogServer() { stop(); }

int CatalogServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void CatalogServer::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
}

void CatalogServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

Bytes HttpFetcher::fetch(std::string_view url, std::string_view section) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  std::string path = "/files/" + std::string(url) + "?section=" + std::string(section);
  auto res = client.Get(path);
  if (!res) {
    throw Error(ErrorCode::kTransferFault, std::string(url) + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 404) {
    auto kind = res->get_header_value("X-Error");
    if (kind == "UnknownSection") throw Error(ErrorCode::kUnknownSection, std::string(url) + "?section=" + std::string(section));
    throw Error(ErrorCode::kUnknownSource, std::string(url));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kTransferFault, std::string(url) + ": HTTP " + std::to_string(res->status));
  }
  return Bytes(res->body.begin(), res->body.end());
}

}  // namespace miniorch
