package io.demo.broker;

class AMQSession {
    private Session advisorySession;
    private boolean closed;

    public Session getAdvisorySession() {
        return this.advisorySession;
    }

    public void setAdvisorySession(Session s) {
        this.advisorySession = s;
    }

    public void dispatch(Message m) {
        advisorySession.send(m);
    }
}
