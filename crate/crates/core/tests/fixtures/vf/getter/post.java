package io.demo.broker;

class AMQSession {
    private Session advisorySession;
    private boolean closed;

    public void dispatch(Message m) {
        if (closed || !m.isTrusted()) {
            throw new SecurityException("untrusted advisory");
        }
        advisorySession.send(m);
    }
}
