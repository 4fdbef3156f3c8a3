#!/usr/bin/env python3
"""Regenerates corpus/*.http and their .truth sidecars.

Fixture sources below mark each ground-truth value inline as
    <<name|location|type>>value<<end>>
The script strips the markers, computes byte offsets, fills in
Content-Length and writes the pair of files.
"""

import re
from pathlib import Path

MARK = re.compile(r"<<([^|>]+)\|([^|>]+)\|([^>]+)>>(.*?)<<end>>", re.S)

ROOT = Path(__file__).resolve().parent.parent / "corpus"


def emit(relpath, request_line, headers, body=""):
    # assemble with placeholders intact, then strip
    plain_body = MARK.sub(lambda m: m.group(4), body)
    head = request_line + "\r\n"
    for h in headers:
        head += h + "\r\n"
    if body:
        head += f"Content-Length: {len(plain_body.encode())}\r\n"
    head += "\r\n"
    raw = head + body

    truth = []
    out = []
    pos = 0
    plain_len = 0
    for m in MARK.finditer(raw):
        lead = raw[pos:m.start()]
        out.append(lead)
        plain_len += len(lead.encode())
        value = m.group(4)
        truth.append((m.group(1), m.group(2), m.group(3), plain_len, len(value.encode())))
        out.append(value)
        plain_len += len(value.encode())
        pos = m.end()
    out.append(raw[pos:])
    plain = "".join(out)

    path = ROOT / relpath
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(plain.encode())
    lines = [f"{n}\t{loc}\t{t}\t{off}\t{ln}" for n, loc, t, off, ln in truth]
    path.with_suffix(".truth").write_text("\n".join(lines) + "\n")


H = ["Host: 192.168.0.1"]
FORM = H + ["Content-Type: application/x-www-form-urlencoded"]
JSONCT = H + ["Content-Type: application/json"]
XMLCT = H + ["Content-Type: text/xml"]


def mp(boundary):
    return H + [f"Content-Type: multipart/form-data; boundary={boundary}"]


# 1. path parameters
emit("path_params/device_id.http",
     "GET /api/device/<<path_seg_3|path:keyvalue|int>>42<<end>>/status HTTP/1.1", H)
emit("path_params/download_token.http",
     "GET /download/<<path_seg_2|path:keyvalue|hex>>7a7b9c0d1e2f3a4b<<end>> HTTP/1.1", H)
emit("path_params/firmware_rev.http",
     "GET /firmware/<<path_seg_2|path:keyvalue|hex>>0304AA55<<end>>/check HTTP/1.1", H)

# 2. query string, key-value
emit("query_keyvalue/wifi.http",
     "GET /goform/wifi?ssid=<<ssid|query:keyvalue|str>>labnet<<end>>"
     "&chan=<<chan|query:keyvalue|int>>6<<end>>&hidden=<<hidden|query:keyvalue|int>>0<<end>> HTTP/1.1", H)
emit("query_keyvalue/paging.http",
     "GET /cgi-bin/status?page=<<page|query:keyvalue|int>>2<<end>>"
     "&sort=<<sort|query:keyvalue|str>>name<<end>> HTTP/1.1", H)
emit("query_keyvalue/custom_acl.http",
     "GET /api/acl?rule=<<rule_1|query:custom|str>>alice<<end>>:<<rule_2|query:custom|int>>10<<end>>"
     "&mode=<<mode|query:keyvalue|str>>strict<<end>> HTTP/1.1", H)

# 3. query string, json value
emit("query_json/filter.http",
     'GET /api/search?filter={"type":"<<filter.type|query:json|str>>device<<end>>",'
     '"limit":<<filter.limit|query:json|int>>20<<end>>} HTTP/1.1', H)
emit("query_json/flags.http",
     'GET /api/query?q={"name":"<<q.name|query:json|str>>cam1<<end>>",'
     '"active":<<q.active|query:json|str>>true<<end>>} HTTP/1.1', H)
emit("query_json/custom_spec.http",
     'GET /api/sched?job={"spec":"<<job.spec_1|query:custom|int>>8<<end>>:'
     '<<job.spec_2|query:custom|int>>30<<end>>:<<job.spec_3|query:custom|int>>59<<end>>"} HTTP/1.1', H)

# 4. query string, xml value
emit("query_xml/wifi_cfg.http",
     "GET /api/cfg?xml=<wifi><mode><<mode|query:xml|str>>ap<<end>></mode>"
     "<chan><<chan|query:xml|int>>6<<end>></chan></wifi> HTTP/1.1", H)
emit("query_xml/device.http",
     'GET /api/dev?x=<dev id="<<id|query:xml|int>>3<<end>>"><<dev|query:xml|str>>cam<<end>></dev> HTTP/1.1', H)
emit("query_xml/custom_portmap.http",
     'GET /api/map?x=<port map="<<map_1|query:custom|str>>eth0<<end>>:'
     '<<map_2|query:custom|int>>8080<<end>>"/> HTTP/1.1', H)

# 5. form data, key-value
emit("form_data/set_wifi.http", "POST /goform/setWifi HTTP/1.1", FORM,
     "ssid=<<ssid|body:formdata|str>>labnet2<<end>>&pass=<<pass|body:formdata|str>>hunter2<<end>>"
     "&chan=<<chan|body:formdata|int>>11<<end>>")
emit("form_data/set_lan.http", "POST /goform/setLan HTTP/1.1", FORM,
     "ip=<<ip|body:formdata|str>>192.168.1.1<<end>>&mask=<<mask|body:formdata|str>>255.255.255.0<<end>>")
emit("form_data/custom_user.http", "POST /goform/setAcl HTTP/1.1", FORM,
     "user=<<user_1|body:custom|str>>bob<<end>>-<<user_2|body:custom|int>>20<<end>>"
     "&level=<<level|body:formdata|int>>3<<end>>")

# 6. form data with json value
emit("form_data_json/apply_cfg.http", "POST /goform/setWifiJson HTTP/1.1", FORM,
     'cfg={"mode":"<<cfg.mode|body:json|str>>ap<<end>>","chan":<<cfg.chan|body:json|int>>6<<end>>}'
     "&apply=<<apply|body:formdata|int>>1<<end>>")
emit("form_data_json/camera.http", "POST /goform/setCam HTTP/1.1", FORM,
     'data={"name":"<<data.name|body:json|str>>cam2<<end>>","rate":<<data.rate|body:json|int>>30<<end>>}'
     "&save=<<save|body:formdata|str>>yes<<end>>")
emit("form_data_json/custom_acl.http", "POST /goform/setAclJson HTTP/1.1", FORM,
     'j={"acl":"<<j.acl_1|body:custom|str>>alice<<end>>|<<j.acl_2|body:custom|str>>stu<<end>>"}'
     "&n=<<n|body:formdata|int>>2<<end>>")

# 7. form data with xml value
emit("form_data_xml/timezone.http", "POST /goform/setSys HTTP/1.1", FORM,
     "xml=<sys><tz><<tz|body:xml|int>>8<<end>></tz></sys>&go=<<go|body:formdata|int>>1<<end>>")
emit("form_data_xml/logging.http", "POST /goform/setLog HTTP/1.1", FORM,
     'cfg=<log level="<<level|body:xml|int>>2<<end>>"><<log|body:xml|str>>on<<end>></log>'
     "&p=<<p|body:formdata|int>>5<<end>>")
emit("form_data_xml/custom_services.http", "POST /goform/setSvc HTTP/1.1", FORM,
     'x=<svc def="<<def_1|body:custom|int>>21<<end>>:<<def_2|body:custom|int>>23<<end>>:'
     '<<def_3|body:custom|int>>80<<end>>"/>&m=<<m|body:formdata|int>>1<<end>>')

# 8. multipart form data
emit("multipart_form_data/wifi.http", "POST /upload/wifi HTTP/1.1", mp("XBOUND1"),
     '--XBOUND1\r\nContent-Disposition: form-data; name="<<ssid_name|body:multipart|str>>ssid<<end>>"\r\n\r\n'
     "<<ssid|body:multipart|str>>labnet3<<end>>\r\n"
     '--XBOUND1\r\nContent-Disposition: form-data; name="<<chan_name|body:multipart|str>>chan<<end>>"\r\n\r\n'
     "<<chan|body:multipart|int>>36<<end>>\r\n--XBOUND1--\r\n")
emit("multipart_form_data/firmware.http", "POST /upload/firmware HTTP/1.1", mp("XBOUND2"),
     '--XBOUND2\r\nContent-Disposition: form-data; name="<<file_name|body:multipart|str>>file<<end>>"; '
     'filename="<<file_filename|body:multipart|str>>fw.bin<<end>>"\r\n\r\n'
     "<<file|body:multipart|str>>BINDATA01<<end>>\r\n--XBOUND2--\r\n")
emit("multipart_form_data/custom_acl.http", "POST /upload/acl HTTP/1.1", mp("XBOUND3"),
     '--XBOUND3\r\nContent-Disposition: form-data; name="<<acl_name|body:multipart|str>>acl<<end>>"\r\n\r\n'
     "<<acl_1|body:custom|str>>alice<<end>>:<<acl_2|body:custom|int>>10<<end>>\r\n--XBOUND3--\r\n")

# 9. multipart with json part
emit("multipart_json/config.http", "POST /upload/cfg HTTP/1.1", mp("XBOUND4"),
     '--XBOUND4\r\nContent-Disposition: form-data; name="<<cfg_name|body:multipart|str>>cfg<<end>>"\r\n\r\n'
     '{"mode":"<<cfg.mode|body:json|str>>wds<<end>>","n":<<cfg.n|body:json|int>>4<<end>>}\r\n--XBOUND4--\r\n')
emit("multipart_json/meta.http", "POST /upload/meta HTTP/1.1", mp("XBOUND5"),
     '--XBOUND5\r\nContent-Disposition: form-data; name="<<meta_name|body:multipart|str>>meta<<end>>"\r\n\r\n'
     '{"tag":"<<meta.tag|body:json|str>>x1<<end>>","on":<<meta.on|body:json|str>>false<<end>>}\r\n--XBOUND5--\r\n')
emit("multipart_json/custom_time.http", "POST /upload/time HTTP/1.1", mp("XBOUND6"),
     '--XBOUND6\r\nContent-Disposition: form-data; name="<<j_name|body:multipart|str>>j<<end>>"\r\n\r\n'
     '{"t":"<<j.t_1|body:custom|int>>7<<end>>:<<j.t_2|body:custom|int>>15<<end>>"}\r\n--XBOUND6--\r\n')

# 10. multipart with xml part
emit("multipart_xml/dns.http", "POST /upload/dns HTTP/1.1", mp("XBOUND7"),
     '--XBOUND7\r\nContent-Disposition: form-data; name="<<x_name|body:multipart|str>>x<<end>>"\r\n\r\n'
     "<cfg><dns><<dns|body:xml|str>>8.8.8.8<<end>></dns></cfg>\r\n--XBOUND7--\r\n")
emit("multipart_xml/doc.http", "POST /upload/doc HTTP/1.1", mp("XBOUND8"),
     '--XBOUND8\r\nContent-Disposition: form-data; name="<<doc_name|body:multipart|str>>doc<<end>>"\r\n\r\n'
     '<a href="<<href|body:xml|str>>https://x.example/<<end>>"><<a|body:xml|str>>home<<end>></a>\r\n--XBOUND8--\r\n')
emit("multipart_xml/custom_tuple.http", "POST /upload/tuple HTTP/1.1", mp("XBOUND9"),
     '--XBOUND9\r\nContent-Disposition: form-data; name="<<p_name|body:multipart|str>>p<<end>>"\r\n\r\n'
     '<t v="<<v_1|body:custom|str>>a<<end>>:<<v_2|body:custom|int>>1<<end>>:'
     '<<v_3|body:custom|str>>b<<end>>:<<v_4|body:custom|int>>2<<end>>"/>\r\n--XBOUND9--\r\n')

# 11. json body
emit("body_json/wifi.http", "POST /api/wifi HTTP/1.1", JSONCT,
     '{"ssid":"<<ssid|body:json|str>>labnet5<<end>>","chan":<<chan|body:json|int>>149<<end>>,'
     '"acl":["<<acl[0]|body:json|str>>aa<<end>>","<<acl[1]|body:json|str>>bb<<end>>"],'
     '"dfs":<<dfs|body:json|str>>true<<end>>}')
emit("body_json/nested.http", "POST /api/system HTTP/1.1", JSONCT,
     '{"wifi":{"mode":"<<wifi.mode|body:json|str>>apclient<<end>>","power":<<wifi.power|body:json|int>>20<<end>>},'
     '"ver":"<<ver|body:json|str>>1.0.3<<end>>"}')
emit("body_json/custom_service.http", "POST /api/service HTTP/1.1", JSONCT,
     '{"svc":"<<svc_1|body:custom|str>>telnet<<end>>|<<svc_2|body:custom|int>>23<<end>>",'
     '"on":<<on|body:json|int>>1<<end>>}')

# 12. xml body
emit("body_xml/proxy.http", "POST /api/proxy HTTP/1.1", XMLCT,
     "<config><host><<host|body:xml|str>>gw.lan<<end>></host>"
     "<port><<port|body:xml|int>>8080<<end>></port></config>")
emit("body_xml/user.http", "POST /api/user HTTP/1.1", XMLCT,
     '<user role="<<role|body:xml|str>>admin<<end>>"><name><<name|body:xml|str>>dave<<end>></name></user>')
emit("body_xml/custom_sched.http", "POST /api/sched HTTP/1.1", XMLCT,
     '<sched at="<<at_1|body:custom|str>>sat<<end>>-<<at_2|body:custom|int>>6<<end>>"/>')

# 13. header parameters
emit("header_params/api_key.http", "GET /status HTTP/1.1",
     H + ['X-Api-Key: <<X-Api-Key|header:keyvalue|hex>>9f8e7d6c5b4a3210<<end>>',
          'X-Request-Id: <<X-Request-Id|header:keyvalue|int>>12345<<end>>'])
emit("header_params/auth.http", "GET / HTTP/1.1",
     H + ['Authorization: <<Authorization|header:keyvalue|str>>Basic YWRtaW46c2VjcmV0MQ==<<end>>',
          'X-Lang: <<X-Lang|header:keyvalue|str>>de<<end>>'])
emit("header_params/custom_span.http", "GET / HTTP/1.1",
     H + ['X-Span: <<X-Span_1|header:custom|str>>svc<<end>>:<<X-Span_2|header:custom|int>>77<<end>>'])

# 14. cookie parameters
emit("cookie_params/theme.http", "GET /home HTTP/1.1",
     H + ['Cookie: sid=<<sid|cookie:keyvalue|str>>abc123def<<end>>; theme=<<theme|cookie:keyvalue|str>>dark<<end>>'])
emit("cookie_params/token.http", "GET /admin HTTP/1.1",
     H + ['Cookie: token=<<token|cookie:keyvalue|base64>>ZGF2ZTQ6cHc=<<end>>; lang=<<lang|cookie:keyvalue|str>>en<<end>>'])
emit("cookie_params/custom_pref.http", "GET /prefs HTTP/1.1",
     H + ['Cookie: pref=<<pref_1|cookie:custom|str>>blue<<end>>|<<pref_2|cookie:custom|int>>2<<end>>; '
          'sid=<<sid|cookie:keyvalue|str>>xyz9<<end>>'])

print(f"wrote {sum(1 for _ in ROOT.rglob('*.http'))} fixtures under {ROOT}")
