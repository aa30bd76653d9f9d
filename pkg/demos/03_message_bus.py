"""The publish/subscribe bus: wildcards, retained state, backpressure.

Run: python3 demos/03_message_bus.py
"""

from gridops.broker import Broker, Envelope


def env(topic, seq, payload, retain=True):
    return Envelope(topic=topic, seq=seq, wall_ts=0.0, sim_ts=float(seq),
                    retain=retain, payload=payload, publisher="demo")


broker = Broker(queue_bound=8, on_overflow=lambda sub: print(
    f"  !! {sub.client} fell behind and was disconnected"))

# retained envelopes accumulate the current grid picture
broker.publish(env("data/area/1", 1, {"load_mw": 291.0}))
broker.publish(env("data/bus/all", 2, {"v_pu": [1.0, 0.98]}))
broker.publish(env("notif/alarm", 3, {"text": "morning checks complete"}, retain=False))

# a late joiner immediately sees the retained picture, not the alarm
late = broker.subscribe("late-joiner", "data/#")
print("late joiner receives:")
for e in late.drain():
    print("  ", e.topic, e.payload)

# wildcard flavours
plus = broker.subscribe("one-level", "data/+/1")
hashm = broker.subscribe("subtree", "data/#")
broker.publish(env("data/area/1", 4, {"load_mw": 295.0}))
broker.publish(env("data/area/1/detail", 5, {"x": 1}))
print("\n'data/+/1' saw:", [e.topic for e in plus.drain()])
print("'data/#'   saw:", [e.topic for e in hashm.drain()])

# a slow consumer cannot stall the publisher: it is cut loose instead
for sub in (late, plus, hashm):
    broker.unsubscribe(sub)
slow = broker.subscribe("slow-console", "data/#")
fast = broker.subscribe("fast-console", "data/#")
for i in range(20):
    broker.publish(env("data/bus/all", 6 + i, {"step": i}))
    fast.drain()  # the fast console keeps up; the slow one never reads
print("\nslow consumer alive:", slow.alive)
print("fast consumer alive:", fast.alive)
print("subscriptions left:", broker.subscription_count())
