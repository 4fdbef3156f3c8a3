#!/usr/bin/env python3
"""Regenerates the testbed scenarios, campaign seed requests, static-analysis
route fixtures and the matching mock provider answers. Keeping all of these in
one generator guarantees the route code text and the fixture keys agree."""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
SCEN = ROOT / "scenarios"
FIXT = ROOT / "prompts" / "fixtures"


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode())


def form_post(path, body, extra_headers=()):
    head = f"POST {path} HTTP/1.1\r\nHost: 192.168.0.1\r\n"
    head += "Content-Type: application/x-www-form-urlencoded\r\n"
    for h in extra_headers:
        head += h + "\r\n"
    head += f"Content-Length: {len(body.encode())}\r\n\r\n"
    return head + body


answers = []


def answer(kind, payload, text):
    answers.append({"kind": kind, "payload": payload, "answer": text})


# --- LSTE scenario: hidden action branch + gated wireless mode -------------

white_list_code = """static int formSetWhiteList(webs_t wp) {
    char *action = websGetVar(wp, "action", "");
    char *mac = websGetVar(wp, "mac", "");
    if (!strcmp(action, "list")) { show_white_list(wp); return 0; }
    if (!strcmp(action, "add")) { white_list_add(mac); return 0; }
    if (!strcmp(action, "del")) { white_list_del(mac); return 0; }
    return -1;
}"""

wifi_extra_code = """static int formWifiExtra(webs_t wp) {
    char *mode = websGetVar(wp, "wl_mode", "");
    if (!strcmp(mode, "repeater_ap")) set_repeater_ap(wp);
    else if (!strcmp(mode, "repeater_client")) set_repeater_client(wp);
    else if (!strcmp(mode, "wips_monitor")) set_wips_monitor(wp);
    else return -1;
    return 0;
}"""

write(SCEN / "lste.json", json.dumps({
    "sinks": [
        {"route": "/goform/SetWhiteList", "behavior": "hidden_branch",
         "param": "action", "trigger": "del"},
        {"route": "/goform/WifiExtra", "behavior": "value_set_gate", "param": "wl_mode",
         "values": ["repeater_ap", "repeater_client", "wips_monitor"]},
    ]
}, indent=2) + "\n")

write(SCEN / "seeds" / "lste" / "white_list.http",
      form_post("/goform/SetWhiteList", "action=list&mac=001122334455"))
write(SCEN / "seeds" / "lste" / "wifi_extra.http",
      form_post("/goform/WifiExtra", "wl_mode=auto&chan=6"))

write(SCEN / "routes" / "lste" / "set_white_list.json", json.dumps({
    "url": "/goform/SetWhiteList", "function_name": "formSetWhiteList",
    "routing_mode": "table", "code": white_list_code}, indent=2) + "\n")
write(SCEN / "routes" / "lste" / "wifi_extra.json", json.dumps({
    "url": "/goform/WifiExtra", "function_name": "formWifiExtra",
    "routing_mode": "table", "code": wifi_extra_code}, indent=2) + "\n")

answer("field_value_extract", white_list_code,
       json.dumps({"values": {"action": ["list", "add", "del"]}, "formats": {}}))
answer("field_value_extract", wifi_extra_code,
       json.dumps({"values": {"wl_mode": ["repeater_ap", "repeater_client", "wips_monitor"]},
                   "formats": {}}))

wl_del = form_post("/goform/SetWhiteList", "action=del&mac=001122334455")
wl_add = form_post("/goform/SetWhiteList", "action=add&mac=001122334455")
answer("packet_from_code", white_list_code, wl_del + "\r\n-+-+-+-+\r\n" + wl_add)
answer("packet_from_code", wifi_extra_code,
       form_post("/goform/WifiExtra", "wl_mode=repeater_ap&chan=6"))

# --- STSA scenario: five gated routes with unequal trigger probability -----

sizes = {"r1": 4, "r2": 6, "r3": 8, "r4": 12, "r5": 40}
stsa_sinks = []
stsa_codes = {}
for name, size in sizes.items():
    values = [f"{name}_v{i}" for i in range(1, size)] + [f"{name}_err"]
    stsa_sinks.append({"route": f"/gate/{name}", "behavior": "value_set_gate",
                       "param": "mode", "values": values, "error_value": f"{name}_err"})
    table = ", ".join(f'"{v}"' for v in values)
    code = (f"static const char *{name}_modes[{size}] = {{{table}}};\n"
            f"static int formGate_{name}(webs_t wp) {{\n"
            f"    char *mode = websGetVar(wp, \"mode\", \"\");\n"
            f"    for (int i = 0; i < {size}; i++)\n"
            f"        if (!strcmp(mode, {name}_modes[i])) return apply_mode(wp, i);\n"
            f"    return -1;\n"
            f"}}")
    stsa_codes[name] = code
    write(SCEN / "routes" / "stsa" / f"gate_{name}.json", json.dumps({
        "url": f"/gate/{name}", "function_name": f"formGate_{name}",
        "routing_mode": "file", "code": code}, indent=2) + "\n")
    write(SCEN / "seeds" / "stsa" / f"gate_{name}.http",
          form_post(f"/gate/{name}", "mode=default"))
    answer("field_value_extract", code,
           json.dumps({"values": {"mode": values}, "formats": {}}))
    answer("packet_from_code", code, form_post(f"/gate/{name}", "mode=" + values[0]))

write(SCEN / "stsa.json", json.dumps({"sinks": stsa_sinks}, indent=2) + "\n")

# --- anomaly scenario: echo + crash sinks, plus an echo-free control -------

write(SCEN / "anomaly.json", json.dumps({
    "sinks": [
        {"route": "/goform/exec", "behavior": "echo_command", "param": "cmd"},
        {"route": "/goform/name", "behavior": "crash_on_length", "param": "name",
         "threshold": 64},
    ]
}, indent=2) + "\n")
write(SCEN / "seeds" / "anomaly" / "exec.http", form_post("/goform/exec", "cmd=ping"))
write(SCEN / "seeds" / "anomaly" / "name.http", form_post("/goform/name", "name=guest"))

write(SCEN / "control.json", json.dumps({
    "sinks": [{"route": "/goform/note", "behavior": "static", "param": "note"}]
}, indent=2) + "\n")
write(SCEN / "seeds" / "control" / "note.http", form_post("/goform/note", "note=hello"))

# --- session scenario: expiring tokens ------------------------------------

write(SCEN / "session.json", json.dumps({
    "sinks": [{"route": "/goform/ping", "behavior": "session_gate", "param": "x"}],
    "session": {"login_route": "/login", "user_param": "user", "pass_param": "pass",
                "username": "admin", "password": "secret", "ttl_seconds": 60,
                "cookie_name": "sid"}
}, indent=2) + "\n")
write(SCEN / "seeds" / "session" / "ping.http",
      "GET /goform/ping?x=1 HTTP/1.1\r\nHost: 192.168.0.1\r\nCookie: sid=seed0\r\n\r\n")
write(SCEN / "session_login.http", form_post("/login", "user=admin&pass=secret"))
write(SCEN / "session_check.http",
      "GET /goform/ping?x=1 HTTP/1.1\r\nHost: 192.168.0.1\r\nCookie: sid=seed0\r\n\r\n")

write(FIXT / "scenario_answers.json", json.dumps(answers, indent=2) + "\n")

print(f"wrote {len(answers)} mock answers and scenarios under {SCEN}")
