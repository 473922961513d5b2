#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "support.hpp"
#include "wayfinder/errors.hpp"
#include "wayfinder/orchestrator.hpp"

using namespace wayfinder;
using nlohmann::json;
using wftest::rule;

TEST(ExtractJson, FencesAndProse) {
    EXPECT_EQ(extract_json_object(R"(noise {"a": 1} tail)")->at("a"), 1);
    EXPECT_EQ(extract_json_object("```json\n{\"b\": \"x}\"}\n```")->at("b"), "x}");
    EXPECT_EQ(extract_json_object(R"({"o": {"i": [1, 2]}})")->at("o").at("i").size(), 2u);
    EXPECT_EQ(extract_json_object(R"({broken {"ok": true})")->at("ok"), true);
    EXPECT_FALSE(extract_json_object("no object here"));
    EXPECT_FALSE(extract_json_object("[1, 2]"));
}

TEST(ParseAction, Verbs) {
    auto v = parse_action("Thought: go\nAction: visit\nAction Input: {\"url\": \"https://a.test/x\"}");
    ASSERT_TRUE(v);
    EXPECT_EQ(v->kind, ActionKind::visit);
    EXPECT_EQ(v->target, "https://a.test/x");
    EXPECT_EQ(v->rationale, "go");
    EXPECT_EQ(parse_action("Action: Backtrack\nAction Input: {}")->kind, ActionKind::backtrack);
    EXPECT_EQ(parse_action("Action: give up")->kind, ActionKind::give_up);
    auto a = parse_action("Thought: done\nAction: answer\nAction Input: {\"answer\": \"42\"}");
    EXPECT_EQ(a->kind, ActionKind::answer);
    EXPECT_EQ(a->target, "42");
    EXPECT_EQ(parse_action("Action: click\nAction Input: https://a.test/y")->target, "https://a.test/y");
    EXPECT_FALSE(parse_action("Action: visit\nAction Input: {}"));
    EXPECT_FALSE(parse_action("Action: dance"));
    EXPECT_FALSE(parse_action("just prose"));
}

TEST(Prompts, DefaultsRenderAndOverride) {
    auto lib = PromptLibrary::defaults();
    for (auto r : {Role::explorer, Role::critic_filter, Role::critic_sufficiency, Role::vlm_perceive, Role::relevance,
                   Role::judge, Role::classifier, Role::generator, Role::teacher})
        EXPECT_TRUE(lib.has(default_template_id(r))) << to_string(r);
    EXPECT_TRUE(lib.has("qa_multi"));
    const auto judge = lib.render("judge", {{"question", "Q?"}, {"gold", "G"}, {"prediction", "P"}});
    EXPECT_NE(judge.find("Reference answer: G"), std::string::npos);
    EXPECT_EQ(judge.find("{gold}"), std::string::npos);

    lib.set("t", "hello {name}, {unknown}");
    EXPECT_EQ(lib.render("t", {{"name", "x"}}), "hello x, {unknown}");
    EXPECT_THROW(lib.get("missing"), ConfigError);

    const auto dir = wftest::scratch_dir("prompts");
    wftest::spit(dir / "judge.txt", "custom {gold}");
    lib.load_dir(dir.string());
    EXPECT_EQ(lib.render("judge", {{"gold", "G"}}), "custom G");
    EXPECT_THROW(lib.load_dir((dir / "nope").string()), ConfigError);
}

TEST(Roles, NamesRoundTrip) {
    for (auto name : {"explorer", "critic_filter", "critic_sufficiency", "vlm_perceive", "relevance", "judge",
                      "classifier", "generator", "teacher"})
        EXPECT_EQ(to_string(*parse_role(name)), name);
    EXPECT_FALSE(parse_role("oracle"));
}

TEST(Heuristic, ExplorerPrefersQueryTerms) {
    HeuristicReasoner h;
    ReasonerRequest req;
    req.role = Role::explorer;
    req.variables["query"] = "When is the submission deadline?";
    req.variables["links_json"] = json::array({{{"url", "https://a.test/venue"}, {"text", "Venue"}},
                                               {{"url", "https://a.test/cfp"}, {"text", "Submission deadline"}},
                                               {{"url", "https://a.test/old"}, {"text", "deadline"}, {"visited", true}}})
                                      .dump();
    const auto a = parse_action(h.complete(req).text);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->target, "https://a.test/cfp");

    req.variables["links_json"] = "[]";
    req.variables["can_backtrack"] = "true";
    EXPECT_EQ(parse_action(h.complete(req).text)->kind, ActionKind::backtrack);
    req.variables["can_backtrack"] = "false";
    EXPECT_EQ(parse_action(h.complete(req).text)->kind, ActionKind::give_up);
}

TEST(Heuristic, FilterSufficiencyJudge) {
    HeuristicReasoner h;
    ReasonerRequest f;
    f.role = Role::critic_filter;
    f.variables = {{"query", "submission deadline"},
                   {"observation", "Welcome\nSubmission deadline: 14 March 2025\n[Home](https://a.test/)"}};
    const auto fv = h.complete(f).parsed;
    ASSERT_TRUE(fv);
    EXPECT_TRUE(fv->at("is_useful").get<bool>());
    EXPECT_EQ(fv->at("extracted_info"), "Submission deadline: 14 March 2025");
    f.variables["observation"] = "Nothing to see";
    EXPECT_FALSE(h.complete(f).parsed->at("is_useful").get<bool>());

    ReasonerRequest s;
    s.role = Role::critic_sufficiency;
    s.variables["accumulated_json"] = "[]";
    EXPECT_FALSE(h.complete(s).parsed->at("is_sufficient").get<bool>());
    s.variables["accumulated_json"] = R"(["a", "b"])";
    EXPECT_EQ(h.complete(s).parsed->at("final_answer"), "b");

    ReasonerRequest j;
    j.role = Role::judge;
    j.variables = {{"gold", "14 March"}, {"prediction", "It is  14 march 2025."}};
    EXPECT_NE(h.complete(j).text.find("SCORE: 1"), std::string::npos);
    j.variables["prediction"] = "May";
    EXPECT_NE(h.complete(j).text.find("SCORE: 0"), std::string::npos);

    ReasonerRequest v;
    v.role = Role::vlm_perceive;
    v.image_payload = "caption text";
    EXPECT_EQ(h.complete(v).text, "caption text");
}

TEST(Heuristic, TeacherChecksSupport) {
    HeuristicReasoner h;
    ReasonerRequest t;
    t.role = Role::teacher;
    t.variables = {{"question", "When is it"}, {"answer", "14 March"}, {"sources", "held on 14 March"}};
    const auto ok = h.complete(t).parsed;
    EXPECT_TRUE(ok->at("is_valid").get<bool>());
    EXPECT_EQ(ok->at("refined_question"), "When is it?");
    t.variables["answer"] = "15 April";
    EXPECT_FALSE(h.complete(t).parsed->at("is_valid").get<bool>());
}

TEST(Scripted, PrecedenceStepThenWhenThenDefault) {
    ScriptedReasoner s({rule(Role::explorer, "default"), rule(Role::explorer, "when-b", std::nullopt, {{"x", {"b"}}}),
                        rule(Role::explorer, "when-a", std::nullopt, {{"x", {"a"}}}),
                        rule(Role::explorer, "step-2", 2), rule(Role::judge, "judge")});
    ReasonerRequest r;
    r.role = Role::explorer;
    r.step = 1;
    EXPECT_EQ(s.complete(r).text, "default");
    r.variables["x"] = "ab";
    EXPECT_EQ(s.complete(r).text, "when-b");  // file order among when rules
    r.variables["x"] = "a";
    EXPECT_EQ(s.complete(r).text, "when-a");
    r.step = 2;
    EXPECT_EQ(s.complete(r).text, "step-2");
    r.role = Role::critic_filter;
    EXPECT_THROW(s.complete(r), BackendError);
    EXPECT_EQ(s.calls(), 5u);
}

TEST(Scripted, WhenNeedsEveryNeedle) {
    ScriptedReasoner s({rule(Role::explorer, "both", std::nullopt, {{"x", {"a", "b"}}, {"y", {"c"}}})},
                       std::make_shared<HeuristicReasoner>());
    ReasonerRequest r;
    r.role = Role::explorer;
    r.variables = {{"x", "a b"}, {"y", "c"}};
    EXPECT_EQ(s.complete(r).text, "both");
    r.variables["y"] = "d";
    EXPECT_NE(s.complete(r).text, "both");  // heuristic fallback
}

TEST(Scripted, FromJsonAndQaIdPath) {
    const auto dir = wftest::scratch_dir("scripts");
    const json doc{{"responses", json::array({{{"role", "judge"}, {"attempt", 1}, {"text", "SCORE: 1"}},
                                              {{"role", "judge"}, {"json", {{"k", 1}}}}})}};
    wftest::spit(dir / "q7.json", doc.dump());
    BackendContext ctx;
    ctx.qa_id = "q7";
    auto r = make_reasoner("script://" + (dir / "{qa_id}.json").string(), ctx);
    ReasonerRequest req;
    req.role = Role::judge;
    EXPECT_EQ(r->complete(req).parsed->at("k"), 1);
    req.attempt = 1;
    EXPECT_EQ(r->complete(req).text, "SCORE: 1");

    EXPECT_THROW(ScriptedReasoner::from_json(json::object(), "x"), ConfigError);
    EXPECT_THROW(ScriptedReasoner::from_json(json{{"responses", json::array({{{"role", "ghost"}, {"text", ""}}})}}, "x"),
                 ConfigError);
    EXPECT_THROW(ScriptedReasoner::from_json(json{{"responses", json::array({{{"role", "judge"}}})}}, "x"),
                 ConfigError);
    EXPECT_THROW(make_reasoner("script:///no/such/file.json", ctx), ConfigError);
    EXPECT_THROW(make_reasoner("carrier-pigeon://", ctx), ConfigError);
    EXPECT_NE(std::dynamic_pointer_cast<HeuristicReasoner>(make_reasoner("heuristic://", ctx)), nullptr);
}

TEST(Routing, PerRoleAndFallback) {
    auto a = std::make_shared<ScriptedReasoner>(std::vector{rule(Role::judge, "A")});
    auto b = std::make_shared<ScriptedReasoner>(std::vector{rule(Role::judge, "B"), rule(Role::teacher, "T")});
    RoutingReasoner r(b);
    r.route(Role::judge, a);
    ReasonerRequest req;
    req.role = Role::judge;
    EXPECT_EQ(r.complete(req).text, "A");
    req.role = Role::teacher;
    EXPECT_EQ(r.complete(req).text, "T");
    RoutingReasoner none(nullptr);
    EXPECT_THROW(none.complete(req), BackendError);
}

TEST(Http, ChatCompletionsRoundTrip) {
    httplib::Server server;
    json last_body;
    std::string last_auth;
    std::mutex mu;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        last_body = json::parse(req.body);
        last_auth = req.get_header_value("Authorization");
        const auto prompt = last_body["messages"][0]["content"].is_string()
                                ? last_body["messages"][0]["content"].get<std::string>()
                                : std::string("multimodal");
        json reply{{"choices", json::array({{{"message", {{"content", "echo: " + prompt.substr(0, 40)}}}}})}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nope\": 1}", "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    ::setenv("WAYFINDER_TEST_KEY", "sekret", 1);
    BackendContext ctx;
    ctx.model = "m1";
    ctx.api_key_env = "WAYFINDER_TEST_KEY";
    ctx.timeout_s = 5;
    auto r = make_reasoner(base + "/v1/chat/completions", ctx);
    ReasonerRequest req;
    req.role = Role::judge;
    req.variables = {{"question", "Q"}, {"gold", "G"}, {"prediction", "P"}};
    const auto resp = r->complete(req);
    EXPECT_EQ(resp.text.rfind("echo: Grade a predicted answer", 0), 0u);
    {
        std::lock_guard lock(mu);
        EXPECT_EQ(last_body["model"], "m1");
        EXPECT_EQ(last_body["temperature"], 0);
        EXPECT_EQ(last_auth, "Bearer sekret");
    }

    req.role = Role::vlm_perceive;
    req.variables = {{"query", "q"}, {"url", "u"}};
    req.image_payload = "data:image/png;base64,AAAA";
    EXPECT_EQ(r->complete(req).text, "echo: multimodal");
    {
        std::lock_guard lock(mu);
        EXPECT_EQ(last_body["messages"][0]["content"][1]["image_url"]["url"], "data:image/png;base64,AAAA");
    }

    EXPECT_THROW(make_reasoner(base + "/broken", ctx)->complete(req), BackendError);
    EXPECT_THROW(make_reasoner(base + "/fail", ctx)->complete(req), BackendError);
    server.stop();
    t.join();
    EXPECT_THROW(make_reasoner(base + "/v1/chat/completions", ctx)->complete(req), BackendError);
}
