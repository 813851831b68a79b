#include "httplib.h"
#include "uiscout/parser.hpp"
#include "uiscout/util.hpp"

namespace uiscout {

HttpTextRecognizer::HttpTextRecognizer(std::string endpoint_url, double timeout_s)
    : url_(std::move(endpoint_url)), timeout_s_(timeout_s) {
  if (timeout_s <= 0) throw std::invalid_argument("timeout must be positive");
}

std::vector<UIElement> HttpTextRecognizer::recognize(const RgbImage& screenshot) const {
  const auto png = encode_png(screenshot);
  const json body{{"image_png_base64",
                   httplib::detail::base64_encode(std::string(png.begin(), png.end()))}};
  const auto [origin, path] = split_url(url_);
  httplib::Client client(origin);
  const auto timeout = std::chrono::duration<double>(timeout_s_);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw AdapterError("OCR endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw AdapterError("OCR endpoint returned HTTP " + std::to_string(res->status));
  std::vector<UIElement> out;
  try {
    for (const auto& e : json::parse(res->body).at("elements")) {
      UIElement el;
      el.name = e.at("name").get<std::string>();
      el.kind = ElementKind::text;
      el.bbox = e.at("bbox").get<BBox>();
      el.source = ElementSource::ocr;
      out.push_back(std::move(el));
    }
  } catch (const json::exception& ex) {
    throw AdapterError(std::string("malformed OCR response: ") + ex.what());
  }
  return out;
}

}  // namespace uiscout
