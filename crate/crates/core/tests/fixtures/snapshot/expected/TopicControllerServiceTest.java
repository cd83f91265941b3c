package io.klaw.service;

import static org.junit.jupiter.api.Assertions.assertEquals;
import static org.mockito.Mockito.when;

import io.klaw.repo.ManageDatabase;
import org.junit.jupiter.api.BeforeEach;
import org.junit.jupiter.api.Test;
import org.junit.jupiter.api.extension.ExtendWith;
import org.mockito.Mock;
import org.mockito.junit.jupiter.MockitoExtension;

@ExtendWith(MockitoExtension.class)
public class TopicControllerServiceTest {
    private static final String TOPIC_ID = "1001";

    @Mock
    private ManageDatabase manageDatabase;

    @Mock
    private MailService mailService;

    private TopicControllerService service;

    @BeforeEach
    void setUp() {
        service = new TopicControllerService(manageDatabase, mailService);
    }

    @Test
    public void deleteTopicRequests() {
        when(mailService.getUserName()).thenReturn("bob");
        when(manageDatabase.deleteTopicRequest(1001, "bob")).thenReturn("success");
        assertEquals("success", service.deleteTopicRequests(TOPIC_ID));
    }

    @Test
    public void defaultOrderIsNewestFirst() {
        String local = "unused";
        assertEquals("NEWEST_FIRST", service.defaultOrder().name());
    }
}
