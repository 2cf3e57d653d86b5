#include <memory>
#include <string>
#include <thread>

#include <gtest/gtest.h>

#include "medevac/http_service.hpp"
#include "test_util.hpp"

using namespace medevac;
using namespace medevac::testing;
using nlohmann::json;

namespace {

class HttpApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServiceOptions opt;
    opt.policy = Policy::Greedy;
    opt.workers = 1;
    svc_ = std::make_unique<DispatchService>(load_scenario_file(data_path("scenarios/deployment_replay.json")), opt);
    api_ = std::make_unique<HttpApi>(*svc_);
    port_ = api_->bind_any_port();
    ASSERT_GT(port_, 0);
    server_ = std::thread([this] { api_->listen_after_bind(); });
    api_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10, 0);
  }

  void TearDown() override {
    api_->stop();
    if (server_.joinable()) server_.join();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  static json body(const httplib::Result& r) { return json::parse(r->body); }

  std::unique_ptr<DispatchService> svc_;
  std::unique_ptr<HttpApi> api_;
  std::unique_ptr<httplib::Client> client_;
  std::thread server_;
  int port_ = 0;
};

const json kRequest{{"id", "h1"}, {"origin", "forward_role2"}, {"patients", 1}, {"exchange", "watercraft:LSV"}};

}  // namespace

TEST_F(HttpApiTest, SubmitThenFetchMission) {
  auto r = post("/api/requests", kRequest);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  const auto created = body(r);
  EXPECT_EQ(created.at("id"), "h1");
  EXPECT_EQ(created.at("plan").at("chosen"), "watercraft:LSV");

  auto g = client_->Get("/api/missions/h1");
  ASSERT_TRUE(g);
  EXPECT_EQ(g->status, 200);
  const auto fetched = body(g);
  EXPECT_EQ(fetched.at("plan").at("schedule"), created.at("plan").at("schedule"));
  EXPECT_EQ(fetched.at("plan").at("chosen"), created.at("plan").at("chosen"));
}

TEST_F(HttpApiTest, ErrorBodies) {
  auto bad = client_->Post("/api/requests", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(body(bad).at("code"), "invalid_request");

  auto missing = post("/api/requests", {{"id", "x"}, {"origin", "forward_role2"}});
  EXPECT_EQ(missing->status, 400);
  EXPECT_EQ(body(missing).at("field"), "patients");

  post("/api/requests", kRequest);
  auto dup = post("/api/requests", kRequest);
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(body(dup).at("code"), "conflict");

  auto nf = client_->Get("/api/missions/nope");
  EXPECT_EQ(nf->status, 404);
  EXPECT_EQ(body(nf).at("code"), "not_found");

  auto no_minutes = post("/api/missions/h1/delays", {{"cause", "x"}});
  EXPECT_EQ(no_minutes->status, 400);
  EXPECT_EQ(body(no_minutes).at("field"), "minutes");

  post("/api/clock/advance", {{"minutes", 300}});
  auto late = post("/api/missions/h1/delays", {{"minutes", 5}});
  EXPECT_EQ(late->status, 409);
  EXPECT_EQ(body(late).at("code"), "invalid_state");
}

TEST_F(HttpApiTest, DelayEndpointShiftsRearDispatch) {
  const auto created = body(post("/api/requests", kRequest));
  auto r = post("/api/missions/h1/delays", {{"minutes", 16}, {"cause", "maritime traffic"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto updated = body(r);
  const IsoClock& iso = svc_->iso();
  const double before = iso.parse(created.at("plan").at("schedule").at("rear_dispatch"));
  const double after = iso.parse(updated.at("plan").at("schedule").at("rear_dispatch"));
  EXPECT_NEAR((after - before) * 60.0, 16.0, 1e-3 / 60.0);
  EXPECT_EQ(updated.at("injected_delays").size(), 1u);
}

TEST_F(HttpApiTest, StateScenarioAndClock) {
  auto s = client_->Get("/api/scenario");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  EXPECT_EQ(body(s).at("watercraft")[0].at("id"), "LSV");

  auto adv = post("/api/clock/advance", {{"minutes", 30}});
  ASSERT_TRUE(adv);
  EXPECT_EQ(adv->status, 200);
  EXPECT_EQ(body(adv).at("time"), "2023-10-15T08:30:00.000Z");

  auto st = client_->Get("/api/state");
  EXPECT_EQ(body(st).at("time"), "2023-10-15T08:30:00.000Z");
  EXPECT_EQ(body(st).at("clock"), "stepped");
}

TEST_F(HttpApiTest, EventStreamWithResume) {
  post("/api/requests", kRequest);
  post("/api/missions/h1/delays", {{"minutes", 4}});

  auto all = client_->Get("/api/events?limit=3");
  ASSERT_TRUE(all);
  EXPECT_EQ(all->status, 200);
  EXPECT_EQ(all->get_header_value("Content-Type"), "text/event-stream");
  const std::string& text = all->body;
  EXPECT_NE(text.find("id: 1\nevent: plan.created\ndata: "), std::string::npos);
  EXPECT_NE(text.find("id: 3\n"), std::string::npos);

  auto resumed = client_->Get("/api/events?since=2&limit=1");
  ASSERT_TRUE(resumed);
  EXPECT_EQ(resumed->body.rfind("id: 3\n", 0), 0u);
  const auto data_pos = resumed->body.find("data: ");
  const auto frame = json::parse(resumed->body.substr(data_pos + 6, resumed->body.find("\n\n") - data_pos - 6));
  EXPECT_EQ(frame.at("seq"), 3);
  EXPECT_EQ(frame.at("mission"), "h1");

  httplib::Headers headers{{"Last-Event-ID", "2"}};
  auto by_header = client_->Get("/api/events?limit=1", headers);
  ASSERT_TRUE(by_header);
  EXPECT_EQ(by_header->body.rfind("id: 3\n", 0), 0u);

  auto bad = client_->Get("/api/events?since=abc");
  EXPECT_EQ(bad->status, 400);
}

TEST_F(HttpApiTest, StreamDeliversEventsPostedAfterConnect) {
  std::string received;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    auto r = c.Get("/api/events?limit=1");
    if (r) received = r->body;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  post("/api/requests", kRequest);
  reader.join();
  EXPECT_EQ(received.rfind("id: 1\nevent: plan.created\n", 0), 0u);
}
